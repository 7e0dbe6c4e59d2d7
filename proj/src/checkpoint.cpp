// Copyright (C) 2026 The cgrs authors
// SPDX-License-Identifier: Apache-2.0

#include <stdexcept>

#include "cgrs/controller.hpp"

namespace cgrs {

CheckpointDetector::CheckpointDetector(std::string marker) : marker_(std::move(marker)) {
  if (marker_.empty()) throw std::invalid_argument("checkpoint marker must be nonempty");
}

bool CheckpointDetector::feed(std::string_view piece) {
  // text_ keeps only the last |marker| - 1 characters seen before this piece;
  // run_end_ is relative to the start of text_.
  const std::size_t carried = text_.size();
  text_.append(piece);

  bool fired = false;
  std::size_t scan = carried + 1 >= marker_.size() ? carried + 1 - marker_.size() : 0;
  for (auto s = text_.find(marker_, scan); s != std::string::npos; s = text_.find(marker_, s + 1)) {
    std::size_t end = s + marker_.size();
    if (in_run_ && s <= run_end_) {
      run_end_ = std::max(run_end_, end);
    } else {
      fired = true;
      in_run_ = true;
      run_end_ = end;
    }
  }

  // A run continues only while its end stays within reach of the next match.
  const std::size_t keep = marker_.size() - 1;
  if (text_.size() > keep) {
    const std::size_t drop = text_.size() - keep;
    text_.erase(0, drop);
    if (in_run_) {
      if (run_end_ < drop) {
        in_run_ = false;
        run_end_ = 0;
      } else {
        run_end_ -= drop;
      }
    }
  }
  return fired;
}

bool detect_checkpoint(std::string_view recent_text, std::string_view marker) {
  CheckpointDetector detector{std::string(marker)};
  return detector.feed(recent_text);
}

}  // namespace cgrs
