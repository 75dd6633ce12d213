#include "cowdet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "cowdet/error.hpp"
#include "cowdet/image.hpp"

namespace cowdet {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'C', 'B', 'D', 'T'};

template <typename U>
void put(std::vector<std::uint8_t>& out, U v) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(bytes_[pos_ + b]) << (8 * b);
    pos_ += sizeof(U);
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n, const char* what) const {
    if (n > bytes_.size() - pos_) throw Error(std::string("truncated checkpoint while reading ") + what);
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::uint8_t* cursor() const { return bytes_.data() + pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const WeightSet<float>& weights, const DetectorConfig& cfg) {
  check_weights(weights, cfg);
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string config = to_json(cfg).dump();
  put<std::uint64_t>(out, config.size());
  out.insert(out.end(), config.begin(), config.end());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(weights.size()));
  for (const auto& [name, arr] : weights) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(arr.shape.size()));
    for (std::size_t d : arr.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (float v : arr.data) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error("not a checkpoint");
  Reader r(bytes);
  r.skip(4);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  const auto config_len = r.get<std::uint64_t>("config length");
  if (config_len > r.remaining()) throw Error("truncated checkpoint while reading config");
  const std::string config_text = r.str(static_cast<std::size_t>(config_len), "config");
  Checkpoint ck;
  try {
    ck.config = detector_config_from_json(nlohmann::json::parse(config_text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint config is not valid JSON: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = r.get<std::uint32_t>("tensor name length");
    std::string name = r.str(name_len, "tensor name");
    const auto rank = r.get<std::uint32_t>("tensor rank");
    if (rank > 8) throw Error("tensor " + name + ": rank " + std::to_string(rank) + " exceeds limit");
    Array<float> arr;
    std::uint64_t elems = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = r.get<std::uint32_t>("tensor dims");
      elems *= dim;
      if (elems > std::numeric_limits<std::uint32_t>::max()) throw Error("tensor " + name + ": dimension overflow");
      arr.shape.push_back(dim);
    }
    if (elems * 4 > r.remaining()) throw Error("truncated checkpoint while reading tensor " + name);
    arr.data.resize(static_cast<std::size_t>(elems));
    for (auto& v : arr.data) v = std::bit_cast<float>(r.get<std::uint32_t>("tensor data"));
    if (!ck.weights.emplace(std::move(name), std::move(arr)).second) throw Error("duplicate tensor name in checkpoint");
  }
  if (r.remaining() != 0) throw Error("trailing bytes after checkpoint tensors");
  check_weights(ck.weights, ck.config);
  return ck;
}

void save_checkpoint(const WeightSet<float>& weights, const DetectorConfig& cfg, const fs::path& path) {
  const auto bytes = encode_checkpoint(weights, cfg);
  atomic_write(path, std::string(bytes.begin(), bytes.end()));
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("not a checkpoint: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace cowdet
