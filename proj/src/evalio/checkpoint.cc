#include "enmloc/evalio/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "enmloc/error.hpp"

namespace enmloc::evalio {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::size_t kHeaderBytes = 4 + 4 + 3 * 8 + 4 * 4;
constexpr std::uint32_t kMaxDim = 1u << 20;

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  template <typename T>
  void put(T v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_floats(std::span<const double> values) {
    buf_.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      buf_[i] = static_cast<float>(values[i]);
    }
    os_.write(reinterpret_cast<const char*>(buf_.data()),
              static_cast<std::streamsize>(buf_.size() * sizeof(float)));
  }

 private:
  std::ostream& os_;
  std::vector<float> buf_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  template <typename T>
  T get(const char* what) {
    T v;
    read(&v, sizeof(T), what);
    return v;
  }
  void get_floats(std::span<double> out, const char* what) {
    buf_.resize(out.size());
    read(buf_.data(), buf_.size() * sizeof(float), what);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<double>(buf_[i]);
    }
  }

 private:
  void read(void* dst, std::size_t n, const char* what) {
    is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw CorruptionError(std::string("checkpoint truncated while reading ") + what);
    }
  }

  std::istream& is_;
  std::vector<float> buf_;
};

std::uint32_t checked_u32(std::size_t v) {
  if (v > 0xffffffffu) {
    throw InvalidArgument("checkpoint dimension does not fit in 32 bits");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::size_t checkpoint_size(const EnmModel& model) {
  const FeatureGrid& g = model.grid();
  std::size_t n = kHeaderBytes + 4 * g.nx() * g.ny() * g.dim();
  for (std::size_t i = 0; i < EnmModel::kLayerCount; ++i) {
    const Linear& l = model.layer(i);
    n += 8 + 4 * (l.out() * l.in() + l.out());
  }
  return n;
}

void save_checkpoint(std::ostream& os, const EnmModel& model) {
  const FeatureGrid& g = model.grid();
  Writer w(os);
  os.write(kCheckpointMagic, 4);
  w.put(kCheckpointVersion);
  w.put(g.origin().x);
  w.put(g.origin().y);
  w.put(g.resolution());
  w.put(checked_u32(g.nx()));
  w.put(checked_u32(g.ny()));
  w.put(checked_u32(g.dim()));
  w.put(checked_u32(model.frequency_bands()));
  w.put_floats(g.features().value.values());
  for (std::size_t i = 0; i < EnmModel::kLayerCount; ++i) {
    const Linear& l = model.layer(i);
    w.put(checked_u32(l.in()));
    w.put(checked_u32(l.out()));
    w.put_floats(l.weight.value.values());
    w.put_floats(l.bias.value.values());
  }
  if (!os) {
    throw IoError("failed writing checkpoint");
  }
}

void save_checkpoint_file(const std::string& path, const EnmModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  save_checkpoint(os, model);
  os.close();
  if (!os) {
    throw IoError("failed writing '" + path + "'");
  }
}

EnmModel load_checkpoint(std::istream& is) {
  char magic[4] = {};
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw FormatError("not a map checkpoint (bad magic)");
  }
  Reader r(is);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const Vec2 origin{r.get<double>("origin"), r.get<double>("origin")};
  const auto resolution = r.get<double>("resolution");
  const auto nx = r.get<std::uint32_t>("nx");
  const auto ny = r.get<std::uint32_t>("ny");
  const auto dim = r.get<std::uint32_t>("feature dim");
  const auto bands = r.get<std::uint32_t>("band count");
  if (nx > kMaxDim || ny > kMaxDim || dim > 1024 || bands > 64 ||
      static_cast<std::uint64_t>(nx) * ny * dim > (1ull << 31)) {
    throw CorruptionError("checkpoint header has implausible dimensions");
  }
  try {
    FeatureGrid grid(origin, resolution, nx, ny, dim);
    r.get_floats(grid.features().value.values(), "features");
    std::array<Linear, EnmModel::kLayerCount> layers;
    for (std::size_t i = 0; i < EnmModel::kLayerCount; ++i) {
      const auto in = r.get<std::uint32_t>("layer shape");
      const auto out = r.get<std::uint32_t>("layer shape");
      if (in > 4096 || out > 4096) {
        throw CorruptionError("checkpoint layer " + std::to_string(i) + " has implausible shape");
      }
      layers[i].weight = diff::ParamTensor(out, in);
      layers[i].bias = diff::ParamTensor(out, 1);
      r.get_floats(layers[i].weight.value.values(), "layer weights");
      r.get_floats(layers[i].bias.value.values(), "layer bias");
    }
    if (is.peek() != std::char_traits<char>::eof()) {
      throw CorruptionError("checkpoint has trailing bytes");
    }
    return EnmModel(std::move(grid), std::move(layers), bands);
  } catch (const ShapeError& e) {
    throw CorruptionError(std::string("checkpoint is inconsistent: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw CorruptionError(std::string("checkpoint is inconsistent: ") + e.what());
  }
}

EnmModel load_checkpoint_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw IoError("cannot open '" + path + "'");
  }
  return load_checkpoint(is);
}

}  // namespace enmloc::evalio
