#include "hops/hops_format.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "hops/error.hpp"

namespace hops {
namespace format {
namespace {

static_assert(std::endian::native == std::endian::little, "HOPS I/O assumes a little-endian host");

constexpr std::uint8_t kMagic[4] = {'H', 'O', 'P', 'S'};
constexpr std::size_t kHeaderBytes = 24;

class Writer {
 public:
  void bytes(const void* p, std::size_t size) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + size);
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f32(float v) { bytes(&v, sizeof v); }
  std::vector<std::uint8_t> take() { return std::move(out_); }
  std::span<const std::uint8_t> view() const { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : buf_(b) {}
  const std::uint8_t* take(std::size_t size) {
    if (buf_.size() - pos_ < size) raise(Errc::TruncatedFile, "unexpected end of data at byte " + std::to_string(pos_));
    const std::uint8_t* p = buf_.data() + pos_;
    pos_ += size;
    return p;
  }
  template <typename T>
  T scalar() {
    T v;
    std::memcpy(&v, take(sizeof v), sizeof v);
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) raise(Errc::InvalidParam, std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept {
  std::uint64_t h = 14695981039346656037ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<std::uint8_t> serialize(const DatasetBundle& bundle) {
  bundle.validate();
  const std::size_t n = bundle.n(), d = bundle.d(), classes = bundle.num_classes;
  std::uint32_t flags = 0;
  if (bundle.labels) flags |= kHasLabels;
  if (bundle.candidates) flags |= kHasCandidates;
  if (bundle.class_anchors) flags |= kHasAnchors;
  if (bundle.class_names) flags |= kHasClassNames;

  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u32(checked_u32(n, "n"));
  w.u32(checked_u32(d, "d"));
  w.u32(checked_u32(classes, "C"));
  w.u32(flags);
  for (float v : bundle.embeddings.values().flat()) w.f32(v);
  if (bundle.labels) {
    for (ClassId l : *bundle.labels) w.u32(l);
  }
  if (bundle.candidates) {
    const std::size_t stride = (classes + 7) / 8;
    std::vector<std::uint8_t> packed(stride);
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(packed.begin(), packed.end(), 0);
      for (std::size_t c = 0; c < classes; ++c) {
        if (bundle.candidates->contains(i, static_cast<ClassId>(c))) {
          packed[c / 8] |= static_cast<std::uint8_t>(1u << (c % 8));
        }
      }
      w.bytes(packed.data(), stride);
    }
  }
  if (bundle.class_anchors) {
    for (float v : bundle.class_anchors->flat()) w.f32(v);
  }
  if (bundle.class_names) {
    std::string joined;
    for (std::size_t j = 0; j < bundle.class_names->size(); ++j) {
      const std::string& name = (*bundle.class_names)[j];
      if (name.find('\n') != std::string::npos) {
        raise(Errc::InvalidParam, "class name " + std::to_string(j) + " contains a newline");
      }
      if (j > 0) joined.push_back('\n');
      joined += name;
    }
    w.u32(checked_u32(joined.size(), "class name blob"));
    w.bytes(joined.data(), joined.size());
  }
  w.u64(fnv1a64(w.view()));
  return w.take();
}

DatasetBundle deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) != 0) raise(Errc::BadMagic, "missing HOPS magic");
  if (bytes.size() < kHeaderBytes) raise(Errc::TruncatedFile, "header is incomplete");

  Reader r(bytes);
  r.take(4);
  const auto version = r.scalar<std::uint32_t>();
  if (version != kVersion) raise(Errc::VersionUnsupported, "version " + std::to_string(version));
  const std::size_t n = r.scalar<std::uint32_t>();
  const std::size_t d = r.scalar<std::uint32_t>();
  const std::size_t classes = r.scalar<std::uint32_t>();
  const auto flags = r.scalar<std::uint32_t>();
  if (flags & ~(kHasLabels | kHasCandidates | kHasAnchors | kHasClassNames)) {
    raise(Errc::MalformedFile, "unknown flag bits");
  }

  // Element counts come from an untrusted header; bound them by the buffer
  // before multiplying by the element width or allocating.
  if (n * d > bytes.size() || ((flags & kHasAnchors) && classes * d > bytes.size())) raise(Errc::TruncatedFile, "declared sizes exceed data");
  MatrixF features;
  {
    const std::uint8_t* p = r.take(n * d * sizeof(float));
    features = MatrixF(n, d);
    std::memcpy(features.flat().data(), p, n * d * sizeof(float));
  }
  std::optional<LabelVector> labels;
  if (flags & kHasLabels) {
    LabelVector l(n);
    std::memcpy(l.data(), r.take(n * sizeof(std::uint32_t)), n * sizeof(std::uint32_t));
    labels = std::move(l);
  }
  std::optional<CandidateMatrix> cands;
  bool stray_bits = false;
  if (flags & kHasCandidates) {
    const std::size_t stride = (classes + 7) / 8;
    if (classes > bytes.size() * 8) raise(Errc::TruncatedFile, "declared sizes exceed data");
    const std::uint8_t* p = r.take(n * stride);
    CandidateMatrix cm(n, classes);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t b = 0; b < stride * 8; ++b) {
        const bool on = (p[i * stride + b / 8] >> (b % 8)) & 1u;
        if (!on) continue;
        if (b < classes) {
          cm.set(i, static_cast<ClassId>(b));
        } else {
          stray_bits = true;
        }
      }
    }
    cands = std::move(cm);
  }
  std::optional<MatrixF> anchors;
  if (flags & kHasAnchors) {
    const std::uint8_t* p = r.take(classes * d * sizeof(float));
    MatrixF a(classes, d);
    std::memcpy(a.flat().data(), p, classes * d * sizeof(float));
    anchors = std::move(a);
  }
  std::optional<std::vector<std::string>> names;
  if (flags & kHasClassNames) {
    const std::size_t total = r.scalar<std::uint32_t>();
    const auto* p = reinterpret_cast<const char*>(r.take(total));
    std::vector<std::string> parts(1);
    for (std::size_t k = 0; k < total; ++k) {
      if (p[k] == '\n') {
        parts.emplace_back();
      } else {
        parts.back().push_back(p[k]);
      }
    }
    names = std::move(parts);
  }
  const std::size_t body = r.pos();
  const auto stored = r.scalar<std::uint64_t>();
  if (stored != fnv1a64(bytes.first(body))) raise(Errc::ChecksumMismatch, "FNV-1a checksum does not match");
  if (r.pos() != bytes.size()) raise(Errc::MalformedFile, "trailing bytes after checksum");
  if (stray_bits) raise(Errc::MalformedFile, "candidate padding bits set");

  DatasetBundle b;
  try {
    b.embeddings = EmbeddingSet::from_float(std::move(features));
    b.num_classes = classes;
    b.labels = std::move(labels);
    b.candidates = std::move(cands);
    b.class_anchors = std::move(anchors);
    b.class_names = std::move(names);
    b.validate();
  } catch (const Error& e) {
    raise(Errc::MalformedFile, e.what());
  }
  return b;
}

}  // namespace format

void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& path) {
  const auto bytes = format::serialize(bundle);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(Errc::IoFailure, "write failed for " + path.string());
}

DatasetBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return format::deserialize(bytes);
}

}  // namespace hops
