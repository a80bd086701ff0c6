#include "cyclegzsl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "cyclegzsl/errors.hpp"

namespace cyclegzsl {

namespace {

constexpr const char *kMagic = "cyclegzsl-checkpoint";
constexpr int kVersion = 1;

void append_le(std::string &out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffU));
}

double read_le(const char *p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

[[noreturn]] void malformed(const std::string &why) {
  throw ValidationError("malformed checkpoint: " + why);
}

std::string expect_line(std::istringstream &in, const char *what) {
  std::string line;
  if (!std::getline(in, line)) malformed(std::string("missing ") + what);
  return line;
}

} // namespace

std::string serialize_checkpoint(const MlpParams &params, const std::string &config_hash) {
  params.validate();
  std::ostringstream header;
  header << kMagic << ' ' << kVersion << '\n'
         << "network " << params.network << '\n'
         << "config_hash " << (config_hash.empty() ? "-" : config_hash) << '\n'
         << "layers " << params.layers.size() << '\n';
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto &l = params.layers[i];
    header << "layer " << i << ' ' << l.weight.rows() << 'x' << l.weight.cols() << ' '
           << activation_name(l.activation) << '\n';
  }
  header << "end_header\n";

  std::string out = header.str();
  for (const Matrix *t : params.tensors())
    for (double v : t->data()) append_le(out, v);
  return out;
}

Checkpoint parse_checkpoint(const std::string &bytes) {
  const auto end = bytes.find("end_header\n");
  if (end == std::string::npos) malformed("no end_header line");
  std::istringstream in(bytes.substr(0, end));

  Checkpoint ck;
  {
    std::istringstream line(expect_line(in, "magic"));
    std::string magic;
    int version = 0;
    line >> magic >> version;
    if (magic != kMagic) malformed("bad magic '" + magic + "'");
    if (version != kVersion) malformed("unsupported version " + std::to_string(version));
  }
  auto keyed = [&](const char *key) {
    std::istringstream line(expect_line(in, key));
    std::string k, v;
    line >> k >> v;
    if (k != key || v.empty()) malformed(std::string("expected '") + key + "' line");
    return v;
  };
  ck.params.network = keyed("network");
  ck.config_hash = keyed("config_hash");
  if (ck.config_hash == "-") ck.config_hash.clear();
  const std::string count_str = keyed("layers");
  std::size_t count = 0;
  try {
    count = std::stoul(count_str);
  } catch (const std::exception &) {
    malformed("bad layer count '" + count_str + "'");
  }

  std::size_t payload = 0;
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream line(expect_line(in, "layer"));
    std::string tag, shape, act;
    std::size_t index = 0;
    line >> tag >> index >> shape >> act;
    const auto x = shape.find('x');
    if (tag != "layer" || index != i || x == std::string::npos) malformed("bad layer line " + std::to_string(i));
    std::size_t rows = 0, cols = 0;
    try {
      rows = std::stoul(shape.substr(0, x));
      cols = std::stoul(shape.substr(x + 1));
    } catch (const std::exception &) {
      malformed("bad layer shape '" + shape + "'");
    }
    ck.params.layers.push_back(
        DenseLayer{Matrix::zeros(rows, cols), Matrix::zeros(1, cols), parse_activation(act)});
    payload += (rows + 1) * cols;
  }

  const std::size_t data_start = end + std::strlen("end_header\n");
  if (bytes.size() - data_start != payload * 8)
    malformed("payload is " + std::to_string(bytes.size() - data_start) + " bytes, expected " +
              std::to_string(payload * 8));
  const char *p = bytes.data() + data_start;
  for (Matrix *t : ck.params.tensors()) {
    for (double &v : t->data()) {
      v = read_le(p);
      p += 8;
    }
    if (!t->all_finite()) malformed("non-finite parameter in " + ck.params.network);
  }
  ck.params.validate();
  return ck;
}

void save_checkpoint(const std::filesystem::path &path, const MlpParams &params,
                     const std::string &config_hash) {
  const std::string bytes = serialize_checkpoint(params, config_hash);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

} // namespace cyclegzsl
