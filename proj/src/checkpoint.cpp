#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "gognn/errors.hpp"
#include "gognn/trainer.hpp"

namespace gognn {

namespace {

constexpr char kMagic[4] = {'G', 'O', 'G', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) buf.push_back(static_cast<unsigned char>(v >> (8 * b)));
}

void put_u64(std::vector<unsigned char>& buf, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) buf.push_back(static_cast<unsigned char>(v >> (8 * b)));
}

void put_f64(std::vector<unsigned char>& buf, double v) {
  put_u64(buf, std::bit_cast<std::uint64_t>(v));
}

void put_f32(std::vector<unsigned char>& buf, float v) {
  put_u32(buf, std::bit_cast<std::uint32_t>(v));
}

void put_string(std::vector<unsigned char>& buf, const std::string& s) {
  put_u64(buf, s.size());
  buf.insert(buf.end(), s.begin(), s.end());
}

/// Bounds-checked little-endian reader over a loaded checkpoint image.
class Reader {
 public:
  Reader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return size_ - offset_; }

  void require(std::size_t bytes, const std::string& what) const {
    if (size_ - offset_ < bytes) {
      throw DataError("checkpoint: truncated while reading " + what);
    }
  }

  std::uint32_t u32(const std::string& what) {
    require(4, what);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) {
      v |= static_cast<std::uint32_t>(data_[offset_ + static_cast<std::size_t>(b)])
           << (8 * b);
    }
    offset_ += 4;
    return v;
  }

  std::uint64_t u64(const std::string& what) {
    require(8, what);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) {
      v |= static_cast<std::uint64_t>(data_[offset_ + static_cast<std::size_t>(b)])
           << (8 * b);
    }
    offset_ += 8;
    return v;
  }

  double f64(const std::string& what) { return std::bit_cast<double>(u64(what)); }
  float f32(const std::string& what) { return std::bit_cast<float>(u32(what)); }

  std::string str(const std::string& what) {
    const std::uint64_t len = u64(what + " length");
    require(len, what);
    std::string s(reinterpret_cast<const char*>(data_ + offset_), len);
    offset_ += len;
    return s;
  }

 private:
  const unsigned char* data_;
  std::size_t size_;
  std::size_t offset_ = 0;
};

}  // namespace

std::uint64_t checkpoint_digest(const unsigned char* data, std::size_t size) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (std::size_t k = 0; k < size; ++k) {
    hash ^= data[k];
    hash *= 1099511628211ULL;
  }
  return hash;
}

void save_checkpoint(const GoGNNModel& model, const CheckpointMeta& meta,
                     const std::string& path) {
  std::vector<unsigned char> buf;
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u32(buf, kFormatVersion);
  put_u64(buf, model.relation_count());
  put_u64(buf, meta.epoch);
  put_f64(buf, meta.best_val_auc);
  put_u64(buf, meta.seed);
  put_string(buf, serialize_config(model.config()));

  const std::vector<std::pair<std::string, Tensor>> params = model.named_parameters();
  put_u32(buf, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    put_string(buf, name);
    const Shape& shape = tensor.shape();
    put_u32(buf, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t dim : shape) put_u64(buf, dim);
    for (double v : tensor.values()) put_f32(buf, static_cast<float>(v));
  }

  put_u64(buf, checkpoint_digest(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path + ": cannot open checkpoint for writing");
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) throw DataError(path + ": checkpoint write failed");
}

LoadedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open checkpoint");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError(path + ": checkpoint read failed");

  if (buf.size() < 8 + 4 + 4) {
    throw DataError("checkpoint: file too small to be valid");
  }
  // Integrity first: the trailer digests everything before it, so any flipped
  // byte is caught before the structure is trusted.
  Reader trailer(buf.data() + buf.size() - 8, 8);
  const std::uint64_t stored_digest = trailer.u64("integrity digest");
  if (checkpoint_digest(buf.data(), buf.size() - 8) != stored_digest) {
    throw DataError("checkpoint: integrity digest mismatch (file corrupted)");
  }

  if (std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw DataError("checkpoint: bad magic bytes");
  }
  Reader body(buf.data() + 4, buf.size() - 8 - 4);
  const std::uint32_t version = body.u32("format version");
  if (version != kFormatVersion) {
    throw DataError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const std::uint64_t relation_count = body.u64("relation count");
  CheckpointMeta meta;
  meta.epoch = body.u64("epoch");
  meta.best_val_auc = body.f64("best validation ranking score");
  meta.seed = body.u64("seed");
  const std::string config_text = body.str("config text");
  const TrainConfig config =
      apply_config_text(TrainConfig::defaults(Task::kCci), config_text, path);

  Rng init_rng(0);
  GoGNNModel model = GoGNNModel::create(config, relation_count, init_rng);
  std::vector<std::pair<std::string, Tensor>> params = model.named_parameters();

  const std::uint32_t record_count = body.u32("record count");
  if (record_count != params.size()) {
    throw DataError("checkpoint: " + std::to_string(record_count) +
                    " parameter records but the config implies " +
                    std::to_string(params.size()));
  }
  for (auto& [name, tensor] : params) {
    const std::string record_name = body.str("record name");
    if (record_name != name) {
      throw DataError("checkpoint: expected record '" + name + "', found '" +
                      record_name + "'");
    }
    const std::uint32_t rank = body.u32("rank of '" + name + "'");
    const Shape& shape = tensor.shape();
    if (rank != shape.size()) {
      throw DataError("checkpoint: rank mismatch for record '" + name + "'");
    }
    for (std::size_t d = 0; d < rank; ++d) {
      const std::uint64_t dim = body.u64("shape of '" + name + "'");
      if (dim != shape[d]) {
        throw DataError("checkpoint: shape mismatch for record '" + name + "'");
      }
    }
    std::vector<double>& values = tensor.mutable_values();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const float v = body.f32("values of '" + name + "'");
      if (!std::isfinite(v)) {
        throw DataError("checkpoint: non-finite value in record '" + name + "'");
      }
      values[k] = static_cast<double>(v);
    }
  }
  if (body.remaining() != 0) {
    throw DataError("checkpoint: trailing bytes after the record table");
  }
  return LoadedModel{std::move(model), meta};
}

}  // namespace gognn
