#include "cowdet/annotate.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "cowdet/error.hpp"
#include "cowdet/image.hpp"
#include "cowdet/parallel.hpp"

namespace cowdet {

namespace fs = std::filesystem;

namespace {

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

AnnotateSummary annotate_candidates(const WeightSet<float>& weights, const DetectorConfig& cfg,
                                    const fs::path& image_dir, double conf_thresh, const fs::path& out_dir,
                                    int workers) {
  if (!(conf_thresh > 0 && conf_thresh < 1)) throw Error("conf_thresh must be in (0, 1)");
  check_weights(weights, cfg);
  const auto files = files_with_extension(image_dir, ".png");
  fs::create_directories(out_dir);

  struct Slot {
    std::optional<LabelSet> labels;
    std::string error;
  };
  std::vector<Slot> slots(files.size());
  parallel_for(files.size(), workers, [&](std::size_t i) {
    Image img;
    try {
      img = load_png(files[i]);
    } catch (const Error& e) {
      slots[i].error = e.what();
      return;
    }
    LabelSet ls;
    ls.image_id = files[i].stem().string();
    for (const Detection& d : predict(img, weights, cfg, conf_thresh)) {
      const NormBox nb = canonical(abs_to_norm(d.box, img.width(), img.height()));
      if (!is_valid(nb)) continue;
      ls.boxes.push_back({d.category_id, nb, d.score});
    }
    slots[i].labels = std::move(ls);
  });

  AnnotateSummary s;
  s.images = static_cast<int>(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!slots[i].labels) {
      std::cerr << "warning: skipping " << files[i].filename().string() << ": " << slots[i].error << "\n";
      s.skipped.emplace_back(files[i].filename().string(), slots[i].error);
      continue;
    }
    write_label_file(*slots[i].labels, out_dir / (files[i].stem().string() + ".txt"), true);
    ++s.written;
    s.boxes += static_cast<int>(slots[i].labels->boxes.size());
  }
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& [file, reason] : s.skipped) skipped.push_back({{"file", file}, {"reason", reason}});
  const nlohmann::json summary{{"images", s.images}, {"written", s.written}, {"boxes", s.boxes},
                               {"conf_thresh", conf_thresh}, {"skipped", skipped}};
  atomic_write(out_dir / "annotate_summary.json", summary.dump(2) + "\n");
  return s;
}

MergeSummary merge_corrections(const fs::path& candidate_dir, const fs::path& correction_dir, double accept_thresh,
                               const fs::path& out_dir) {
  const auto candidates = files_with_extension(candidate_dir, ".txt");
  std::vector<std::string> names;
  for (const auto& p : candidates) names.push_back(p.filename().string());
  if (!correction_dir.empty() && fs::exists(correction_dir)) {
    for (const auto& p : files_with_extension(correction_dir, ".txt")) names.push_back(p.filename().string());
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  fs::create_directories(out_dir);

  MergeSummary s;
  for (const std::string& name : names) {
    const fs::path corr = correction_dir.empty() ? fs::path{} : correction_dir / name;
    if (!corr.empty() && fs::exists(corr)) {
      const std::string text = read_file(corr);
      LabelSet ls;
      try {
        ls = parse_label_text(text, false, fs::path(name).stem().string());
        for (const auto& b : ls.boxes) require_valid(b.box);
      } catch (const Error& e) {
        throw Error("invalid correction " + name + ": " + e.what());
      }
      atomic_write(out_dir / name, text);
      ++s.corrected;
      s.boxes += static_cast<int>(ls.boxes.size());
    } else {
      LabelSet ls = parse_label_file(candidate_dir / name, true);
      std::erase_if(ls.boxes, [&](const LabeledBox& b) { return b.confidence.value_or(0.0) < accept_thresh; });
      for (auto& b : ls.boxes) b.confidence.reset();
      write_label_file(ls, out_dir / name, false);
      s.boxes += static_cast<int>(ls.boxes.size());
    }
    ++s.images;
  }
  return s;
}

}  // namespace cowdet
