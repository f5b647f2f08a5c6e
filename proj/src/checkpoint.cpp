#include "p4g/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "p4g/error.hpp"

namespace p4g {

namespace {

constexpr char kMagic[8] = {'P', '4', 'G', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string32(std::ostream& out, const std::string& s) {
  put<uint32_t>(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_block(std::ostream& out, const std::string& name, const Eigen::MatrixXd& m) {
  put_string32(out, name);
  put<uint64_t>(out, static_cast<uint64_t>(m.rows()));
  put<uint64_t>(out, static_cast<uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(m.size())));
}

struct Source {
  std::istream& in;
  std::string path;

  template <typename T>
  T get() {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(path + ": truncated checkpoint");
    return v;
  }
  std::string bytes(uint64_t n) {
    if (n > (1ULL << 32)) throw FormatError(path + ": implausible length");
    std::string s(n, '\0');
    if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw FormatError(path + ": truncated checkpoint");
    return s;
  }
  std::string string32() { return bytes(get<uint32_t>()); }
  Eigen::MatrixXd matrix() {
    const auto rows = get<uint64_t>();
    const auto cols = get<uint64_t>();
    if (rows > (1ULL << 28) || cols > (1ULL << 28) || rows * cols > (1ULL << 31))
      throw FormatError(path + ": implausible tensor shape");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (m.size() &&
        !in.read(reinterpret_cast<char*>(m.data()),
                 static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(m.size()))))
      throw FormatError(path + ": truncated checkpoint");
    return m;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const Vocabulary& vocab,
                     const KeyValueConfig& metadata) {
  if (vocab.size() != model.vocabulary_size())
    throw ConfigError("vocabulary size differs from the model's embedding matrix");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path);
  KeyValueConfig header = metadata;
  write_model_config(model.config(), header);
  out.write(kMagic, sizeof kMagic);
  put<uint32_t>(out, kCheckpointVersion);
  const std::string text = header.canonical();
  put<uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<uint64_t>(out, vocab.size());
  for (const auto& t : vocab.tokens()) put_string32(out, t);
  const auto& params = model.params();
  put<uint64_t>(out, params.size() + 2);
  put_block(out, "embeddings", model.embeddings());
  put_block(out, "idf", model.idf());
  for (size_t i = 0; i < params.size(); ++i) put_block(out, params.name(i), params.value(i));
  if (!out) throw Error("error writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  Source src{in, path};
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw FormatError(path + ": not a checkpoint");
  const auto version = src.get<uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
  const auto header = KeyValueConfig::parse(src.bytes(src.get<uint64_t>()));
  Vocabulary vocab;
  const auto nvocab = src.get<uint64_t>();
  for (uint64_t i = 0; i < nvocab; ++i) {
    const auto tok = src.string32();
    if (i == 0) continue;  // reserved unknown token
    vocab.add(tok);
  }
  if (vocab.size() != nvocab) throw FormatError(path + ": duplicate vocabulary entries");
  const auto nblocks = src.get<uint64_t>();
  if (nblocks < 2) throw FormatError(path + ": missing tensor blocks");
  std::string name = src.string32();
  if (name != "embeddings") throw FormatError(path + ": expected embeddings block");
  Eigen::MatrixXd embeddings = src.matrix();
  name = src.string32();
  if (name != "idf") throw FormatError(path + ": expected idf block");
  Eigen::MatrixXd idf = src.matrix();

  Model model(read_model_config(header), std::move(embeddings), 0);
  model.set_idf(idf.col(0));
  auto& params = model.params();
  size_t loaded = 0;
  for (uint64_t b = 2; b < nblocks; ++b) {
    name = src.string32();
    Eigen::MatrixXd m = src.matrix();
    auto idx = params.find(name);
    if (!idx) throw FormatError(path + ": unexpected tensor " + name);
    if (params.value(*idx).rows() != m.rows() || params.value(*idx).cols() != m.cols())
      throw FormatError(path + ": shape mismatch for " + name);
    params.value(*idx) = std::move(m);
    ++loaded;
  }
  if (loaded != params.size()) throw FormatError(path + ": missing tensors");
  for (size_t i = 0; i < params.size(); ++i)
    if (!params.value(i).allFinite()) throw NumericError(path + ": non-finite values in " + params.name(i));
  return {std::move(model), std::move(vocab), header};
}

}  // namespace p4g
