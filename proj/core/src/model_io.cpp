#include "gencnn/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gencnn/errors.hpp"

namespace gencnn {

namespace {

// explicit little-endian encoding, independent of host byte order

void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

void put_f32(std::ostream& os, float f) { put_u32(os, std::bit_cast<uint32_t>(f)); }

void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("model file truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw IoError("model file truncated");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }

std::string get_string(std::istream& is) {
  uint32_t n = get_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw IoError("model file truncated");
  return s;
}

void put_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  put_string(os, name);
  put_u32(os, static_cast<uint32_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) put_u64(os, static_cast<uint64_t>(t.dim(i)));
  for (int64_t i = 0; i < t.size(); ++i) put_f32(os, static_cast<float>(t[i]));
}

void get_tensor_into(std::istream& is, const std::string& expect_name, Tensor& dst) {
  std::string name = get_string(is);
  if (name != expect_name) {
    throw IoError("model file tensor order: expected '" + expect_name + "', found '" + name + "'");
  }
  uint32_t rank = get_u32(is);
  if (rank != static_cast<uint32_t>(dst.rank())) {
    throw IoError("model file tensor '" + name + "': rank " + std::to_string(rank) +
                  " does not match expected " + dst.shape_str());
  }
  for (uint32_t i = 0; i < rank; ++i) {
    uint64_t d = get_u64(is);
    if (d != static_cast<uint64_t>(dst.dim(static_cast<int>(i)))) {
      throw IoError("model file tensor '" + name + "': shape does not match expected " +
                    dst.shape_str());
    }
  }
  for (int64_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<double>(get_f32(is));
}

void put_config(std::ostream& os, const ModelConfig& c) {
  put_u32(os, static_cast<uint32_t>(c.l_alpha));
  put_u32(os, static_cast<uint32_t>(c.l_beta));
  put_u32(os, static_cast<uint32_t>(c.embed_dim));
  put_u32(os, static_cast<uint32_t>(c.window));
  put_u32(os, static_cast<uint32_t>(c.conv_layers()));
  for (int m : c.tf_maps) put_u32(os, static_cast<uint32_t>(m));
  for (int m : c.ta_maps) put_u32(os, static_cast<uint32_t>(m));
  put_u32(os, static_cast<uint32_t>(c.fc_dim));
  put_u32(os, static_cast<uint32_t>(c.cluster_count));
  os.put(static_cast<char>(c.ablation));
  os.put(static_cast<char>(c.gate_mode));
}

ModelConfig get_config(std::istream& is) {
  ModelConfig c;
  c.l_alpha = static_cast<int>(get_u32(is));
  c.l_beta = static_cast<int>(get_u32(is));
  c.embed_dim = static_cast<int>(get_u32(is));
  c.window = static_cast<int>(get_u32(is));
  uint32_t layers = get_u32(is);
  if (layers == 0 || layers > 64) throw IoError("model file: implausible layer count");
  c.tf_maps.assign(layers, 0);
  c.ta_maps.assign(layers, 0);
  for (uint32_t i = 0; i < layers; ++i) c.tf_maps[i] = static_cast<int>(get_u32(is));
  for (uint32_t i = 0; i < layers; ++i) c.ta_maps[i] = static_cast<int>(get_u32(is));
  c.fc_dim = static_cast<int>(get_u32(is));
  c.cluster_count = static_cast<int>(get_u32(is));
  int ab = is.get();
  int gm = is.get();
  if (ab < 0 || ab > 3 || gm < 0 || gm > 1 || !is) throw IoError("model file: bad config block");
  c.ablation = static_cast<Ablation>(ab);
  c.gate_mode = static_cast<GateMode>(gm);
  return c;
}

}  // namespace

void save_model(const std::string& path, const ParameterSet& ps, const Vocabulary& vocab) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write model file: " + path);
  os.write(kModelMagic, sizeof(kModelMagic));
  put_u32(os, kModelFormatVersion);
  put_config(os, ps.config);

  std::string vtext = vocab.serialize();
  put_u64(os, vtext.size());
  os.write(vtext.data(), static_cast<std::streamsize>(vtext.size()));

  auto all = ps.params();
  put_u32(os, static_cast<uint32_t>(2 * all.size()));
  for (const Param* p : all) {
    put_tensor(os, p->name, p->value);
    put_tensor(os, p->name + ".adagrad", p->accum);
  }
  if (!os) throw IoError("write failure on model file: " + path);
}

LoadedModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open model file: " + path);

  char magic[sizeof(kModelMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    throw IoError("not a genCNN model file: " + path);
  }
  uint32_t version = get_u32(is);
  if (version != kModelFormatVersion) {
    throw IoError("unsupported model format version " + std::to_string(version));
  }

  ModelConfig config = get_config(is);

  uint64_t vlen = get_u64(is);
  std::string vtext(vlen, '\0');
  is.read(vtext.data(), static_cast<std::streamsize>(vlen));
  if (!is) throw IoError("model file truncated in vocabulary block");
  std::istringstream vs(vtext);
  Vocabulary vocab = Vocabulary::load(vs);

  LoadedModel out{ParameterSet::create(config, vocab.size()), std::move(vocab)};

  uint32_t count = get_u32(is);
  auto all = out.params.params();
  if (count != 2 * all.size()) {
    throw IoError("model file holds " + std::to_string(count) + " tensors, expected " +
                  std::to_string(2 * all.size()));
  }
  for (Param* p : all) {
    get_tensor_into(is, p->name, p->value);
    get_tensor_into(is, p->name + ".adagrad", p->accum);
  }
  return out;
}

}  // namespace gencnn
