#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cowdet/detector.hpp"

namespace cowdet {

struct AnnotateSummary {
  int images = 0;
  int written = 0;
  int boxes = 0;
  std::vector<std::pair<std::string, std::string>> skipped;  // file, reason
};

/// Runs predict on every PNG in `image_dir` (sorted by name) and writes
/// `<stem>.txt` candidates with a confidence column into `out_dir`.
/// Unreadable images are skipped with a warning on stderr and listed in
/// `annotate_summary.json`.
AnnotateSummary annotate_candidates(const WeightSet<float>& weights, const DetectorConfig& cfg,
                                    const std::filesystem::path& image_dir, double conf_thresh,
                                    const std::filesystem::path& out_dir, int workers = 1);

struct MergeSummary {
  int images = 0;
  int corrected = 0;
  int boxes = 0;
};

/// A correction file replaces its candidates verbatim; otherwise candidates
/// scoring >= accept_thresh are kept without the confidence column.
MergeSummary merge_corrections(const std::filesystem::path& candidate_dir,
                               const std::filesystem::path& correction_dir, double accept_thresh,
                               const std::filesystem::path& out_dir);

}  // namespace cowdet
