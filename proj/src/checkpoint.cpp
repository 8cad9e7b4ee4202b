#include "pgmel/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "pgmel/data.hpp"

namespace pgmel {

namespace {

constexpr char kMagic[8] = {'P', 'G', 'M', 'L', 'C', 'K', 'P', 'T'};

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

template <class T>
void put(std::string& buf, T v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_bytes(std::string& buf, const std::string& s) {
  put<uint64_t>(buf, s.size());
  buf.append(s);
}

class Reader {
 public:
  Reader(const std::string& buf, size_t at) : buf_(buf), at_(at) {}

  template <class T>
  T get() {
    T v;
    need(sizeof(v));
    std::memcpy(&v, buf_.data() + at_, sizeof(v));
    at_ += sizeof(v);
    return v;
  }

  std::string get_bytes() {
    uint64_t n = get<uint64_t>();
    need(n);
    std::string s = buf_.substr(at_, n);
    at_ += n;
    return s;
  }

  size_t at() const { return at_; }

 private:
  void need(size_t n) {
    if (at_ + n > buf_.size()) throw DataError("truncated checkpoint");
  }
  const std::string& buf_;
  size_t at_;
};

}  // namespace

void Checkpoint::pack(const std::string& prefix, ModelParams& params) {
  for (Parameter* p : params.all()) {
    tensors.emplace_back(prefix + "/" + p->name, p->value);
  }
}

void Checkpoint::unpack(const std::string& prefix, ModelParams& params) const {
  for (Parameter* p : params.all()) {
    const std::string key = prefix + "/" + p->name;
    auto it = std::find_if(tensors.begin(), tensors.end(),
                           [&](const auto& kv) { return kv.first == key; });
    if (it == tensors.end()) throw DataError("checkpoint missing tensor " + key);
    if (it->second.shape() != p->value.shape()) {
      throw DataError("checkpoint tensor " + key + " has shape " +
                      it->second.shape_str() + ", expected " + p->value.shape_str());
    }
    p->value = it->second;
    p->zero_grad();
  }
}

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put<uint32_t>(buf, cp.format_version);
  put_bytes(buf, cp.config.to_json().dump());
  put<int32_t>(buf, cp.epoch);
  for (uint64_t s : cp.rng_state) put<uint64_t>(buf, s);
  put<uint32_t>(buf, static_cast<uint32_t>(cp.tensors.size()));
  for (const auto& [name, tensor] : cp.tensors) {
    put_bytes(buf, name);
    put<uint32_t>(buf, static_cast<uint32_t>(tensor.rank()));
    for (Eigen::Index d : tensor.shape()) put<int64_t>(buf, d);
    buf.append(reinterpret_cast<const char*>(tensor.data().data()),
               sizeof(double) * tensor.size());
  }
  put<uint64_t>(buf, fnv1a64(buf));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(kMagic) + sizeof(uint64_t)) throw DataError("truncated checkpoint");

  uint64_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - sizeof(stored), sizeof(stored));
  std::string payload = buf.substr(0, buf.size() - sizeof(stored));
  if (fnv1a64(payload) != stored) throw DataError("checkpoint checksum mismatch: " + path);
  if (std::memcmp(payload.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("bad checkpoint magic: " + path);
  }

  Reader r(payload, sizeof(kMagic));
  Checkpoint cp;
  cp.format_version = r.get<uint32_t>();
  if (cp.format_version != 1) {
    throw DataError("unsupported checkpoint version " + std::to_string(cp.format_version));
  }
  cp.config = RunConfig::from_json(Json::parse(r.get_bytes()));
  cp.epoch = r.get<int32_t>();
  for (uint64_t& s : cp.rng_state) s = r.get<uint64_t>();
  uint32_t count = r.get<uint32_t>();
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_bytes();
    uint32_t rank = r.get<uint32_t>();
    if (rank < 1 || rank > 2) throw DataError("bad tensor rank in checkpoint");
    std::vector<Eigen::Index> shape;
    for (uint32_t d = 0; d < rank; ++d) shape.push_back(r.get<int64_t>());
    Tensor t = Tensor::zeros(shape);
    for (Eigen::Index j = 0; j < t.size(); ++j) t[j] = r.get<double>();
    cp.tensors.emplace_back(std::move(name), std::move(t));
  }
  return cp;
}

}  // namespace pgmel
