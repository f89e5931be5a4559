#include "hiergen/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hiergen/errors.hpp"

namespace hiergen {

namespace {

constexpr char kMagic[4] = {'H', 'G', 'C', 'K'};

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename T>
  T get() {
    unsigned char bytes[sizeof(T)];
    read(reinterpret_cast<char*>(bytes), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }

  std::string get_string(std::size_t limit = std::size_t{1} << 30) {
    const auto n = get<std::uint32_t>();
    if (n > limit) throw CorruptCheckpoint("string length " + std::to_string(n) + " is implausible");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }

  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw CorruptCheckpoint("file is truncated");
  }

 private:
  std::istream& in_;
};

std::string vocab_line(const Vocabulary& v) { return join(v.tokens()); }

void read_header(Reader& r) {
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw CorruptCheckpoint("bad magic bytes");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw IncompatibleCheckpoint("format version " + std::to_string(version) + ", this build reads " +
                                 std::to_string(kCheckpointVersion));
}

}  // namespace

template <typename Real>
void save_checkpoint(const std::filesystem::path& path, const Seq2SeqModel<Real>& model, const Vocabulary& source_vocab,
                     const Vocabulary& target_vocab, const std::string& task) {
  if (source_vocab.size() != model.config().source_vocab || target_vocab.size() != model.config().target_vocab)
    throw VocabMismatch("vocabulary sizes do not match the model config");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  std::string config = model.config().to_text();
  config += "step=" + std::to_string(model.step()) + '\n';
  if (!task.empty()) config += "task=" + task + '\n';
  config += "source_tokens=" + vocab_line(source_vocab) + '\n';
  config += "target_tokens=" + vocab_line(target_vocab) + '\n';
  put_string(out, config);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& [name, t] : model.parameters()) {
    put_string(out, name);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(precision_of<Real>()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint64_t>(out, d);
    for (Real v : t.data) put<Real>(out, v);
  }
  if (!out) throw IoError("failed writing " + path.string());
}

template <typename Real>
LoadedModel<Real> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  Reader r(in);
  read_header(r);

  std::istringstream config_in(r.get_string());
  std::string model_text, line, source_line, target_line, task;
  std::uint64_t step = 0;
  bool have_source = false, have_target = false;
  while (std::getline(config_in, line)) {
    if (line.rfind("step=", 0) == 0) {
      step = std::stoull(line.substr(5));
    } else if (line.rfind("task=", 0) == 0) {
      task = line.substr(5);
    } else if (line.rfind("source_tokens=", 0) == 0) {
      source_line = line.substr(14);
      have_source = true;
    } else if (line.rfind("target_tokens=", 0) == 0) {
      target_line = line.substr(14);
      have_target = true;
    } else {
      model_text += line + '\n';
    }
  }
  if (!have_source || !have_target) throw CorruptCheckpoint("config block lacks vocabularies");
  ModelConfig config;
  try {
    config = ModelConfig::from_text(model_text);
  } catch (const std::invalid_argument& e) {
    throw CorruptCheckpoint(std::string("bad config block: ") + e.what());
  }

  const auto count = r.get<std::uint32_t>();
  ParamMap<Real> params;
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = r.get_string(4096);
    const auto tag = r.get<std::uint8_t>();
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw CorruptCheckpoint("tensor rank " + std::to_string(rank) + " is implausible");
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    if (shape_size(shape) > (std::size_t{1} << 32)) throw CorruptCheckpoint("tensor " + name + " is implausibly large");
    Tensor<Real> t(shape);
    if (tag == static_cast<std::uint8_t>(Precision::kF32)) {
      for (auto& v : t.data) v = static_cast<Real>(r.get<float>());
    } else if (tag == static_cast<std::uint8_t>(Precision::kF64)) {
      for (auto& v : t.data) v = static_cast<Real>(r.get<double>());
    } else {
      throw CorruptCheckpoint("unknown precision tag " + std::to_string(tag));
    }
    params.emplace(std::move(name), std::move(t));
  }
  char extra;
  if (in.read(&extra, 1); in.gcount() != 0) throw CorruptCheckpoint("trailing bytes after tensor records");

  Vocabulary source_vocab, target_vocab;
  try {
    source_vocab = Vocabulary::from_tokens(split_whitespace(source_line));
    target_vocab = Vocabulary::from_tokens(split_whitespace(target_line));
  } catch (const IoError& e) {
    throw CorruptCheckpoint(e.what());
  }
  try {
    Seq2SeqModel<Real> model(config, std::move(params));
    model.set_step(step);
    if (source_vocab.size() != config.source_vocab || target_vocab.size() != config.target_vocab)
      throw CorruptCheckpoint("embedded vocabularies disagree with the config");
    return {std::move(model), std::move(source_vocab), std::move(target_vocab), std::move(task)};
  } catch (const ShapeError& e) {
    throw CorruptCheckpoint(e.what());
  }
}

Precision checkpoint_precision(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  Reader r(in);
  read_header(r);
  r.get_string();
  if (r.get<std::uint32_t>() == 0) return Precision::kF32;
  r.get_string(4096);
  const auto tag = r.get<std::uint8_t>();
  if (tag != 4 && tag != 8) throw CorruptCheckpoint("unknown precision tag " + std::to_string(tag));
  return static_cast<Precision>(tag);
}

template void save_checkpoint<float>(const std::filesystem::path&, const Seq2SeqModel<float>&, const Vocabulary&,
                                     const Vocabulary&, const std::string&);
template void save_checkpoint<double>(const std::filesystem::path&, const Seq2SeqModel<double>&, const Vocabulary&,
                                      const Vocabulary&, const std::string&);
template LoadedModel<float> load_checkpoint<float>(const std::filesystem::path&);
template LoadedModel<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace hiergen
