#include "discsent/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "discsent/error.hpp"

namespace discsent::model {

namespace {

constexpr std::size_t kMagicSize = 8;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

float get_f32(const std::string& in, std::size_t pos) { return std::bit_cast<float>(get_u32(in, pos)); }

}  // namespace

const Tensor<float>& TensorArchive::at(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw IndexError("archive has no tensor '" + name + "'");
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  nlohmann::json header = archive.header;
  auto dir = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : archive.tensors) {
    dir.push_back({{"name", t.name}, {"shape", t.value.shape()}, {"offset", offset}});
    offset += t.value.size() * 4;
  }
  header["tensors"] = std::move(dir);
  const std::string text = header.dump();

  std::string out(kMagic, kMagicSize);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& t : archive.tensors) {
    for (float f : t.value.values()) put_f32(out, f);
  }

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const std::string src = path.string();
  if (in.size() < kMagicSize + 8 || std::memcmp(in.data(), kMagic, kMagicSize) != 0) {
    throw FormatError(src + ": not a discsent archive (bad magic)");
  }
  const auto version = get_u32(in, kMagicSize);
  if (version != kFormatVersion) {
    throw FormatError(src + ": unsupported format version " + std::to_string(version));
  }
  const std::size_t header_len = get_u32(in, kMagicSize + 4);
  const std::size_t payload = kMagicSize + 8 + header_len;
  if (in.size() < payload) throw FormatError(src + ": truncated header");

  TensorArchive archive;
  try {
    archive.header = nlohmann::json::parse(in.begin() + kMagicSize + 8, in.begin() + static_cast<long>(payload));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(src + ": malformed header: " + e.what());
  }
  if (!archive.header.is_object() || !archive.header.contains("tensors") || !archive.header["tensors"].is_array()) {
    throw FormatError(src + ": header lacks a tensor directory");
  }
  std::size_t expected_end = payload;
  try {
    for (const auto& entry : archive.header["tensors"]) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<num::Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      std::size_t count = 1;
      for (auto d : shape) count *= d;
      const std::size_t begin = payload + offset;
      if (begin < payload || begin + count * 4 > in.size()) {
        throw FormatError(src + ": truncated payload for tensor '" + name + "'");
      }
      std::vector<float> values(count);
      for (std::size_t i = 0; i < count; ++i) values[i] = get_f32(in, begin + 4 * i);
      archive.tensors.push_back({name, Tensor<float>(shape, std::move(values))});
      expected_end = std::max(expected_end, begin + count * 4);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(src + ": malformed tensor directory: " + e.what());
  }
  if (expected_end != in.size()) throw FormatError(src + ": trailing bytes after payload");
  archive.header.erase("tensors");
  return archive;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  TensorArchive a;
  a.header["kind"] = "checkpoint";
  a.header["encoder"] = to_json(ckpt.model.encoder().config());
  a.header["train_config"] = ckpt.train_config;
  a.header["step"] = ckpt.step;
  a.header["vocabulary"] = {{"tokens", ckpt.vocab.tokens()}, {"counts", ckpt.vocab.counts()}};
  for (const auto* p : ckpt.model.parameters()) a.tensors.push_back({p->name, p->value});
  write_archive(path, a);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto a = read_archive(path);
  const std::string src = path.string();
  Checkpoint ckpt;
  try {
    if (a.header.value("kind", std::string()) != "checkpoint") throw FormatError(src + ": archive is not a checkpoint");
    const auto& v = a.header.at("vocabulary");
    ckpt.vocab = text::Vocabulary::from_tokens(v.at("tokens").get<std::vector<std::string>>(),
                                               v.at("counts").get<std::vector<std::uint64_t>>());
    ckpt.train_config = a.header.value("train_config", nlohmann::json::object());
    ckpt.step = a.header.value("step", std::uint64_t{0});
    const auto config = encoder_config_from_json(a.header.at("encoder"));
    if (config.vocab_size != ckpt.vocab.size()) {
      throw ShapeError(src + ": encoder expects " + std::to_string(config.vocab_size) + " tokens but the vocabulary has " +
                       std::to_string(ckpt.vocab.size()));
    }
    SplitMix64 rng(0);
    ckpt.model = Model<float>(config, rng);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(src + ": malformed checkpoint header: " + e.what());
  }
  for (auto* p : ckpt.model.parameters()) {
    const Tensor<float>* t = nullptr;
    for (const auto& nt : a.tensors) {
      if (nt.name == p->name) t = &nt.value;
    }
    if (!t) throw FormatError(src + ": missing tensor '" + p->name + "'");
    if (t->shape() != p->value.shape()) {
      const std::string msg = src + ": tensor '" + p->name + "' has shape " + num::shape_string(t->shape()) +
                              ", expected " + num::shape_string(p->value.shape());
      if (p->name == "embedding" && t->cols() == p->value.cols()) throw ShapeError(msg);
      throw FormatError(msg);
    }
    p->value = *t;
  }
  if (a.tensors.size() != ckpt.model.parameters().size()) throw FormatError(src + ": unexpected extra tensors");
  return ckpt;
}

}  // namespace discsent::model
