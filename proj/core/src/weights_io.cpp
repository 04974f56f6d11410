#include "s2wat/weights_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace s2wat {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const std::string& path;
  std::string bytes;
  std::size_t pos = 0;

  void need(std::size_t n) {
    if (pos + n > bytes.size())
      throw DataError(path + ": truncated weights file at byte " + std::to_string(pos));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[pos + i]);
    pos += 4;
    return v;
  }
  float f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_weights(const ParameterStoreT<float>& store, const std::string& path) {
  std::string out;
  out.append(kWeightsMagic, 4);
  put_u32(out, kWeightsVersion);
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, tensor] : store.items()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t i = 0; i < tensor.rank(); ++i)
      put_u32(out, static_cast<std::uint32_t>(tensor.dim(i)));
    for (std::size_t i = 0; i < tensor.size(); ++i) put_f32(out, tensor.data()[i]);
  }
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open " + tmp + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DataError("cannot rename " + tmp + " to " + path);
}

ParameterStoreT<float> load_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path);
  Reader r{path, std::string(std::istreambuf_iterator<char>(f), {}), 0};

  r.need(4);
  if (std::memcmp(r.bytes.data(), kWeightsMagic, 4) != 0)
    throw DataError(path + ": bad magic, expected \"S2WT\"");
  r.pos = 4;
  std::uint32_t version = r.u32();
  if (version != kWeightsVersion)
    throw DataError(path + ": unsupported format version " + std::to_string(version));
  std::uint32_t count = r.u32();

  ParameterStoreT<float> store;
  for (std::uint32_t t = 0; t < count; ++t) {
    std::uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    std::uint32_t rank = r.u32();
    Shape shape(rank);
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape[i] = r.u32();
      if (shape[i] == 0) throw DataError(path + ": zero extent in tensor " + name);
      n *= shape[i];
    }
    std::vector<float> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = r.f32();
    store.add(name, Tensor::from(std::move(shape), std::move(data)));
  }
  if (r.pos != r.bytes.size())
    throw DataError(path + ": trailing bytes after tensor payload");
  return store;
}

void assign_weights(ParameterStoreT<float>& dst, const ParameterStoreT<float>& loaded) {
  std::size_t used = 0;
  for (auto& [name, tensor] : dst.items()) {
    const Tensor* src = loaded.find(name);
    if (!src) throw DataError("weights file is missing parameter " + name);
    if (src->shape() != tensor.shape())
      throw DataError("weights shape mismatch for " + name + ": file has " +
                      shape_str(src->shape()) + ", model needs " + shape_str(tensor.shape()));
    std::memcpy(tensor.data(), src->data(), tensor.size() * sizeof(float));
    ++used;
  }
  if (used != loaded.size())
    throw DataError("weights file has " + std::to_string(loaded.size() - used) +
                    " parameters the model does not expect");
}

}  // namespace s2wat
