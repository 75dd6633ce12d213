#include "cowdet/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cowdet/error.hpp"
#include "cowdet/image.hpp"
#include "cowdet/rng.hpp"

namespace cowdet {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(CameraTag tag) {
  switch (tag) {
    case CameraTag::IW: return "IW";
    case CameraTag::IP: return "IP";
    case CameraTag::IC: return "IC";
    case CameraTag::OP: return "OP";
    case CameraTag::OE: return "OE";
    case CameraTag::OC: return "OC";
  }
  return "?";
}

CameraTag parse_camera(std::string_view s) {
  for (CameraTag t : kAllCameras) {
    if (to_string(t) == s) return t;
  }
  throw Error("invalid camera tag \"" + std::string(s) + "\"");
}

Environment environment(CameraTag tag) {
  switch (tag) {
    case CameraTag::IW:
    case CameraTag::IP:
    case CameraTag::IC:
      return Environment::indoor;
    default:
      return Environment::outdoor;
  }
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  for (Split v : {Split::train, Split::val, Split::test, Split::unassigned}) {
    if (to_string(v) == s) return v;
  }
  throw Error("invalid split \"" + std::string(s) + "\"");
}

void validate(const Manifest& m) {
  if (m.version != 1) throw Error("unsupported manifest version " + std::to_string(m.version));
  std::set<std::string> seen;
  for (std::size_t i = 0; i < m.images.size(); ++i) {
    const ImageRecord& r = m.images[i];
    const std::string where = "images[" + std::to_string(i) + "]";
    if (r.id.empty()) throw Error(where + ".id: empty image id");
    if (r.path.empty()) throw Error(where + ".path: empty path");
    if (r.width <= 0 || r.height <= 0) throw Error(where + ": width and height must be positive");
    if (!seen.insert(r.id).second) throw Error("duplicate image id \"" + r.id + "\"");
  }
}

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw Error(where + ": unknown field \"" + key + "\"");
  }
}

template <typename V>
V field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw Error(where + ": missing field \"" + key + "\"");
  try {
    return obj.at(key).get<V>();
  } catch (const json::exception&) {
    throw Error(where + "." + key + ": wrong type");
  }
}

}  // namespace

std::string manifest_to_json(const Manifest& m) {
  json images = json::array();
  for (const ImageRecord& r : m.images) {
    images.push_back(json{{"id", r.id},
                          {"path", r.path},
                          {"camera", std::string(to_string(r.camera))},
                          {"split", std::string(to_string(r.split))},
                          {"width", r.width},
                          {"height", r.height}});
  }
  json doc{{"version", m.version}, {"images", images}};
  return doc.dump(2) + "\n";
}

Manifest manifest_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("malformed manifest: ") + e.what());
  }
  if (!doc.is_object()) throw Error("malformed manifest: top level must be an object");
  reject_unknown(doc, {"version", "images"}, "manifest");
  Manifest m;
  m.version = field<int>(doc, "version", "manifest");
  if (!doc.contains("images") || !doc["images"].is_array()) throw Error("manifest: \"images\" must be an array");
  std::size_t i = 0;
  for (const json& item : doc["images"]) {
    const std::string where = "images[" + std::to_string(i++) + "]";
    if (!item.is_object()) throw Error(where + ": must be an object");
    reject_unknown(item, {"id", "path", "camera", "split", "width", "height"}, where);
    ImageRecord r;
    r.id = field<std::string>(item, "id", where);
    r.path = field<std::string>(item, "path", where);
    try {
      r.camera = parse_camera(field<std::string>(item, "camera", where));
      r.split = parse_split(field<std::string>(item, "split", where));
    } catch (const Error& e) {
      throw Error(where + ": " + e.what());
    }
    r.width = field<int>(item, "width", where);
    r.height = field<int>(item, "height", where);
    m.images.push_back(std::move(r));
  }
  validate(m);
  return m;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return manifest_from_json(ss.str());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void save_manifest(const Manifest& m, const fs::path& path) {
  validate(m);
  atomic_write(path, manifest_to_json(m));
}

fs::path image_path(const fs::path& manifest_path, const ImageRecord& r) {
  fs::path p(r.path);
  if (p.is_absolute()) return p;
  return manifest_path.parent_path() / p;
}

fs::path label_dir(const fs::path& manifest_path) { return manifest_path.parent_path() / "labels"; }

fs::path label_path(const fs::path& manifest_path, const std::string& id) {
  return label_dir(manifest_path) / (id + ".txt");
}

namespace {

bool parse_double(std::string_view tok, double& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size() && std::isfinite(out);
}

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

LabelSet parse_label_text(std::string_view text, bool has_confidence, std::string image_id) {
  LabelSet ls;
  ls.image_id = std::move(image_id);
  const std::size_t expected = has_confidence ? 6 : 5;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    auto tok = tokens(line);
    if (tok.empty()) continue;
    const std::string at = ", line " + std::to_string(line_no);
    if (tok.size() != expected) {
      throw Error("expected " + std::to_string(expected) + " fields, got " + std::to_string(tok.size()) + at);
    }
    double v[6] = {};
    for (std::size_t k = 0; k < tok.size(); ++k) {
      if (!parse_double(tok[k], v[k])) throw Error("malformed number \"" + std::string(tok[k]) + "\"" + at);
    }
    if (v[0] < 0 || v[0] != std::floor(v[0])) throw Error("invalid category" + at);
    LabeledBox lb;
    lb.category_id = static_cast<int>(v[0]);
    lb.box = NormBox{v[1], v[2], v[3], v[4]};
    if (!is_valid(lb.box)) throw Error("coordinate out of range" + at);
    lb.box = canonical(lb.box);
    if (has_confidence) {
      if (v[5] < 0 || v[5] > 1) throw Error("confidence out of range" + at);
      lb.confidence = v[5];
    }
    ls.boxes.push_back(lb);
  }
  return ls;
}

LabelSet parse_label_file(const fs::path& path, bool has_confidence) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open label file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_label_text(ss.str(), has_confidence, path.stem().string());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string format_labels(const LabelSet& ls, bool with_confidence) {
  std::string out;
  char buf[160];
  for (const LabeledBox& b : ls.boxes) {
    int n = std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f", b.category_id, b.box.cx, b.box.cy,
                          b.box.w, b.box.h);
    out.append(buf, n);
    if (with_confidence) {
      n = std::snprintf(buf, sizeof buf, " %.6f", b.confidence.value_or(1.0));
      out.append(buf, n);
    }
    out += '\n';
  }
  return out;
}

void write_label_file(const LabelSet& ls, const fs::path& path, bool with_confidence) {
  atomic_write(path, format_labels(ls, with_confidence));
}

void validate(const SplitRatios& r) {
  if (!(r.train > 0) || !(r.val >= 0) || !(r.test >= 0)) throw Error("split ratios must be non-negative with train > 0");
  if (std::abs(r.train + r.val + r.test - 1.0) > 1e-9) throw Error("split ratios must sum to 1");
}

Manifest split(const Manifest& m, const SplitRatios& ratios, std::uint64_t seed) {
  validate(ratios);
  const std::size_t n = m.images.size();
  if (n < 3) throw Error("dataset too small to split");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  auto quota = [n](double r) { return static_cast<std::size_t>(std::floor(n * r + 1e-9)); };
  const std::size_t n_train = quota(ratios.train), n_val = quota(ratios.val), n_test = quota(ratios.test);
  Manifest out = m;
  for (std::size_t k = 0; k < n; ++k) {
    Split s = Split::train;
    if (k >= n_train && k < n_train + n_val) s = Split::val;
    else if (k >= n_train + n_val && k < n_train + n_val + n_test) s = Split::test;
    out.images[order[k]].split = s;
  }
  return out;
}

}  // namespace cowdet
