// SPDX-License-Identifier: Apache-2.0
#include "qat/experiment/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "qat/error.hpp"
#include "qat/io.hpp"

namespace qat::experiment {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'Q', 'A', 'T', 'C', 'K', 'P', 'T', '\0'};

std::uint64_t fnv1a(const char* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(p[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <class T>
  void pod(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_ += s;
  }
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string& buffer() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end, std::string path)
      : bytes_(bytes), end_(end), path_(std::move(path)) {}
  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) {
    if (n > end_ - pos_) throw CheckpointError("'" + path_ + "': truncated checkpoint");
  }
  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
  std::string path_;
};

}  // namespace

template <class Real>
ad::Tensor<Real> Blob::as() const {
  if (elem_bytes != sizeof(Real)) {
    throw CheckpointError("blob holds " + std::to_string(elem_bytes) + "-byte reals, expected " +
                          std::to_string(sizeof(Real)));
  }
  ad::Tensor<Real> t(shape);
  if (bytes.size() != t.size() * sizeof(Real)) throw CheckpointError("blob size does not match its shape");
  std::memcpy(t.data().data(), bytes.data(), bytes.size());
  return t;
}

template <class Real>
Blob Blob::from(const ad::Tensor<Real>& t) {
  Blob b;
  b.shape = t.shape();
  b.elem_bytes = sizeof(Real);
  b.bytes.resize(t.size() * sizeof(Real));
  std::memcpy(b.bytes.data(), t.data().data(), b.bytes.size());
  return b;
}

template ad::Tensor<float> Blob::as<float>() const;
template ad::Tensor<double> Blob::as<double>() const;
template Blob Blob::from<float>(const ad::Tensor<float>&);
template Blob Blob::from<double>(const ad::Tensor<double>&);

void Checkpoint::save(const std::filesystem::path& path) const {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.str(meta.dataset);
  w.str(meta.model);
  w.pod<std::uint64_t>(meta.width);
  w.pod<std::uint64_t>(meta.input.size());
  for (auto d : meta.input) w.pod<std::uint64_t>(d);
  w.pod<std::uint64_t>(meta.classes);
  w.pod<std::uint64_t>(meta.spec_hash);
  w.pod<std::int32_t>(meta.qc.weight_bits);
  w.pod<std::int32_t>(meta.qc.act_bits);
  w.pod<std::uint8_t>(meta.qc.quantize_first_last);
  w.pod<std::uint8_t>(meta.qc.weight_affine_map);
  w.pod<std::uint32_t>(meta.phase_index);
  w.str(meta.phase_name);
  w.str(meta.rng_state);
  w.pod<std::uint64_t>(blobs.size());
  for (const auto& [name, b] : blobs) {
    w.str(name);
    w.pod<std::uint64_t>(b.shape.size());
    for (auto d : b.shape) w.pod<std::uint64_t>(d);
    w.pod<std::uint8_t>(b.elem_bytes);
    w.pod<std::uint64_t>(b.bytes.size());
    w.raw(b.bytes.data(), b.bytes.size());
  }
  const std::uint64_t sum = fnv1a(w.buffer().data(), w.buffer().size());
  w.pod<std::uint64_t>(sum);
  write_file_atomic(path, w.buffer());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw CheckpointError("checkpoint not found: '" + path.string() + "'");
  const std::string bytes = read_file(path);
  const std::string p = path.string();
  if (bytes.size() < sizeof kMagic + 4 + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("'" + p + "' is not a checkpoint (bad magic)");
  }
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, 8);
  Reader r(bytes, body, p);
  char magic[sizeof kMagic];
  r.raw(magic, sizeof magic);
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("'" + p + "': unsupported checkpoint version " + std::to_string(version));
  }
  if (fnv1a(bytes.data(), body) != stored) throw CheckpointError("'" + p + "': checksum mismatch");

  Checkpoint c;
  c.meta.dataset = r.str();
  c.meta.model = r.str();
  c.meta.width = r.pod<std::uint64_t>();
  c.meta.input.resize(r.pod<std::uint64_t>());
  for (auto& d : c.meta.input) d = r.pod<std::uint64_t>();
  c.meta.classes = r.pod<std::uint64_t>();
  c.meta.spec_hash = r.pod<std::uint64_t>();
  c.meta.qc.weight_bits = r.pod<std::int32_t>();
  c.meta.qc.act_bits = r.pod<std::int32_t>();
  c.meta.qc.quantize_first_last = r.pod<std::uint8_t>() != 0;
  c.meta.qc.weight_affine_map = r.pod<std::uint8_t>() != 0;
  c.meta.phase_index = r.pod<std::uint32_t>();
  c.meta.phase_name = r.str();
  c.meta.rng_state = r.str();
  const auto n = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string name = r.str();
    Blob b;
    b.shape.resize(r.pod<std::uint64_t>());
    for (auto& d : b.shape) d = r.pod<std::uint64_t>();
    b.elem_bytes = r.pod<std::uint8_t>();
    b.bytes.resize(r.pod<std::uint64_t>());
    r.raw(b.bytes.data(), b.bytes.size());
    c.blobs.emplace(std::move(name), std::move(b));
  }
  if (!r.done()) throw CheckpointError("'" + p + "': trailing bytes after blobs");
  return c;
}

template <class Real>
void Checkpoint::store_model(nn::Model<Real>& model, const std::string& prefix) {
  for (const auto* param : std::as_const(model).all_parameters()) {
    blobs[prefix + "param/" + param->name] = Blob::from(param->value);
  }
  for (const auto& buf : model.buffers()) {
    blobs[prefix + "buffer/" + buf.name] = Blob::from(*buf.tensor);
  }
}

template <class Real>
void Checkpoint::restore_model(nn::Model<Real>& model, const std::string& prefix) const {
  if (model.spec().hash() != meta.spec_hash) {
    throw CheckpointError("checkpoint was written for a different model architecture (spec hash mismatch)");
  }
  auto fetch = [&](const std::string& name, const ad::Shape& shape) {
    auto it = blobs.find(name);
    if (it == blobs.end()) throw CheckpointError("checkpoint has no blob '" + name + "'");
    ad::Tensor<Real> t = it->second.template as<Real>();
    if (t.shape() != shape) {
      throw CheckpointError("blob '" + name + "' has shape " + ad::to_string(t.shape()) +
                            ", model expects " + ad::to_string(shape));
    }
    return t;
  };
  for (auto* param : model.all_parameters()) {
    param->value = fetch(prefix + "param/" + param->name, param->value.shape());
  }
  for (auto& buf : model.buffers()) {
    *buf.tensor = fetch(prefix + "buffer/" + buf.name, buf.tensor->shape());
  }
}

template void Checkpoint::store_model<float>(nn::Model<float>&, const std::string&);
template void Checkpoint::store_model<double>(nn::Model<double>&, const std::string&);
template void Checkpoint::restore_model<float>(nn::Model<float>&, const std::string&) const;
template void Checkpoint::restore_model<double>(nn::Model<double>&, const std::string&) const;

}  // namespace qat::experiment
