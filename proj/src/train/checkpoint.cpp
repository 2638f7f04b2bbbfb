#include "iitnet/train/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <vector>

#include "iitnet/model/factory.hpp"

namespace iitnet::train {

namespace {

constexpr char kMagic[8] = {'I', 'I', 'T', 'C', 'K', 'P', 'T', '\0'};
constexpr uint8_t kVersion = 1;

struct TensorEntry {
  std::string name;
  const double* src = nullptr;
  Eigen::Index rows = 0, cols = 0;
};

void write_u64(std::ostream& os, uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, model::SequenceClassifier& model,
                     const Adam* adam, const CheckpointMeta& meta) {
  std::vector<TensorEntry> entries;
  for (const auto& p : model.params())
    entries.push_back({"param." + p.name, p.value, p.rows, p.cols});
  for (const auto& b : model.buffers())
    entries.push_back({"buffer." + b.name, b.value, b.rows, b.cols});
  if (adam) {
    for (const auto& s : const_cast<Adam*>(adam)->slots()) {
      entries.push_back({"adam.m." + s.name, s.m.data(), s.m.size(), 1});
      entries.push_back({"adam.v." + s.name, s.v.data(), s.v.size(), 1});
    }
  }

  nlohmann::json index = nlohmann::json::array();
  uint64_t offset = 0;  // in doubles
  for (const auto& e : entries) {
    index.push_back({{"name", e.name},
                     {"rows", e.rows},
                     {"cols", e.cols},
                     {"offset", offset}});
    offset += static_cast<uint64_t>(e.rows) * e.cols;
  }

  nlohmann::json header = {
      {"model_kind", model.kind()},
      {"model_config", model.config_json()},
      {"step", meta.step},
      {"best_val_accuracy", meta.best_val_accuracy},
      {"extra", meta.extra},
      {"tensors", index},
  };
  if (adam) {
    const auto& c = adam->config();
    header["adam"] = {{"t", adam->t()},
                      {"lr", c.lr},
                      {"beta1", c.beta1},
                      {"beta2", c.beta2},
                      {"eps", c.eps}};
  }
  const std::string header_str = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 8);
  os.put(static_cast<char>(kVersion));
  write_u64(os, header_str.size());
  os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& e : entries) {
    os.write(reinterpret_cast<const char*>(e.src),
             static_cast<std::streamsize>(sizeof(double) * e.rows * e.cols));
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);

  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  const int version = is.get();
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version) + ": " + path);

  const uint64_t header_len = read_u64(is);
  std::string header_str(header_len, '\0');
  is.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!is) throw std::runtime_error("truncated checkpoint header: " + path);
  const nlohmann::json header = nlohmann::json::parse(header_str);

  LoadedCheckpoint out;
  out.model = model::make_classifier(header.at("model_kind"), header.at("model_config"));
  out.meta.step = header.at("step");
  out.meta.best_val_accuracy = header.at("best_val_accuracy");
  out.meta.extra = header.value("extra", nlohmann::json());

  const std::streampos data_start = is.tellg();
  auto read_into = [&](const nlohmann::json& entry, double* dst, Eigen::Index rows,
                       Eigen::Index cols) {
    const uint64_t offset = entry.at("offset");
    if (entry.at("rows") != rows || entry.at("cols") != cols)
      throw std::runtime_error("checkpoint tensor shape mismatch for " +
                               entry.at("name").get<std::string>());
    is.seekg(data_start + static_cast<std::streamoff>(offset * sizeof(double)));
    is.read(reinterpret_cast<char*>(dst),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
    if (!is) throw std::runtime_error("truncated checkpoint data: " + path);
  };

  // Index by name for lookup.
  std::map<std::string, nlohmann::json> index;
  for (const auto& e : header.at("tensors")) index[e.at("name")] = e;
  auto find = [&](const std::string& name) -> const nlohmann::json& {
    auto it = index.find(name);
    if (it == index.end())
      throw std::runtime_error("checkpoint missing tensor " + name + ": " + path);
    return it->second;
  };

  for (auto& p : out.model->params())
    read_into(find("param." + p.name), p.value, p.rows, p.cols);
  for (auto& b : out.model->buffers())
    read_into(find("buffer." + b.name), b.value, b.rows, b.cols);

  if (header.contains("adam")) {
    AdamConfig cfg;
    cfg.lr = header["adam"].at("lr");
    cfg.beta1 = header["adam"].at("beta1");
    cfg.beta2 = header["adam"].at("beta2");
    cfg.eps = header["adam"].at("eps");
    out.adam = std::make_unique<Adam>(out.model->params(), cfg);
    out.adam->set_t(header["adam"].at("t"));
    for (auto& s : out.adam->slots()) {
      read_into(find("adam.m." + s.name), s.m.data(), s.m.size(), 1);
      read_into(find("adam.v." + s.name), s.v.data(), s.v.size(), 1);
    }
  }
  return out;
}

}  // namespace iitnet::train
