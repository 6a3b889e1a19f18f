// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary layout:
//   8 bytes   magic "LAHACKPT"
//   uint32    format version (little-endian)
//   uint64    header length in bytes (little-endian)
//   header    UTF-8 JSON: configs, vocabulary, optimizer state, tensor table
//   payload   tensors as little-endian IEEE-754 doubles, in table order

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "laha/data/vocabulary.hpp"
#include "laha/error.hpp"
#include "laha/io.hpp"
#include "laha/model/forward.hpp"
#include "laha/training/trainer.hpp"

namespace laha {

inline constexpr char kCheckpointMagic[8] = {'L', 'A', 'H', 'A', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  Vocabulary vocab;
  TrainConfig train;
  TrainingState state;

  bool operator==(const Checkpoint& o) const {
    return model.config == o.model.config && model.params == o.model.params &&
           model.label_matrix == o.model.label_matrix && model.variant == o.model.variant && vocab == o.vocab &&
           train == o.train && state == o.state;
  }
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class T>
T get_le(std::string_view in, std::size_t at) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

struct TensorSlot {
  std::string name;
  Matrix* value;
};

// Tensor order: parameters, Adam first moments, Adam second moments, label matrix.
inline std::vector<TensorSlot> tensor_slots(Checkpoint& c) {
  std::vector<TensorSlot> out;
  for (auto& [n, m] : c.model.params.named()) out.push_back({n, m});
  const auto names = c.model.params.named();
  for (std::size_t i = 0; i < c.state.adam.m.size(); ++i) out.push_back({"adam.m." + names[i].first, &c.state.adam.m[i]});
  for (std::size_t i = 0; i < c.state.adam.v.size(); ++i) out.push_back({"adam.v." + names[i].first, &c.state.adam.v[i]});
  if (!c.model.label_matrix.empty()) out.push_back({"label_matrix", &c.model.label_matrix});
  return out;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& cp) {
  Checkpoint c = cp;  // tensor_slots needs mutable access
  const auto slots = detail::tensor_slots(c);

  std::string payload;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& s : slots) {
    tensors.push_back({{"name", s.name}, {"rows", s.value->rows()}, {"cols", s.value->cols()}});
    for (double x : s.value->data()) detail::put_le(payload, std::bit_cast<std::uint64_t>(x));
  }

  const auto& mc = c.model.config;
  nlohmann::json h;
  h["format_version"] = kCheckpointVersion;
  h["model"] = {{"vocab_size", mc.vocab_size}, {"d", mc.d}, {"r", mc.r}, {"d_a", mc.d_a}, {"k", mc.k},
                {"max_len", mc.max_len}, {"variant", to_string(c.model.variant)}};
  h["train"] = {{"learning_rate", c.train.learning_rate},
                {"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"negatives_per_doc", c.train.negatives_per_doc},
                {"seed", c.train.seed},
                {"finetune_word_vectors", c.train.finetune_word_vectors}};
  const auto& ac = c.state.adam.config;
  h["adam"] = {{"beta1", ac.beta1}, {"beta2", ac.beta2}, {"eps", ac.eps}, {"step", c.state.adam.step}};
  h["epoch"] = c.state.epoch;
  // Every draw is derived from (seed, epoch, document); this pair is the full generator state.
  h["rng"] = {{"seed", c.train.seed}, {"next_epoch", c.state.epoch}};
  h["loss_history"] = c.state.loss_history;
  h["vocabulary"] = c.vocab.tokens();
  h["tensors"] = std::move(tensors);
  h["payload_bytes"] = payload.size();
  std::ostringstream cs;
  cs << std::hex << detail::fnv1a(payload);
  h["payload_fnv1a"] = cs.str();

  const std::string header = h.dump();
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint64_t>(out, header.size());
  out += header;
  out += payload;
  return out;
}

/// Parses a checkpoint image. Throws IncompatibleCheckpointError on a version
/// mismatch and FormatError on any structural damage; nothing is returned
/// unless the whole image validates.
inline Checkpoint parse_checkpoint(std::string_view bytes) {
  constexpr std::size_t kPrefix = sizeof(kCheckpointMagic) + 4 + 8;
  if (bytes.size() < kPrefix || std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw FormatError("checkpoint: bad magic");
  }
  const auto version = detail::get_le<std::uint32_t>(bytes, 8);
  if (version != kCheckpointVersion) {
    throw IncompatibleCheckpointError("checkpoint: format version " + std::to_string(version) + ", expected " +
                                      std::to_string(kCheckpointVersion));
  }
  const auto header_len = detail::get_le<std::uint64_t>(bytes, 12);
  if (header_len > bytes.size() - kPrefix) throw FormatError("checkpoint: truncated header");
  const std::string_view payload = bytes.substr(kPrefix + header_len);

  Checkpoint c;
  try {
    const auto h = nlohmann::json::parse(bytes.substr(kPrefix, header_len));
    if (h.at("format_version").get<std::uint32_t>() != version) throw FormatError("checkpoint: version fields disagree");

    const auto& m = h.at("model");
    auto& mc = c.model.config;
    mc.vocab_size = m.at("vocab_size");
    mc.d = m.at("d");
    mc.r = m.at("r");
    mc.d_a = m.at("d_a");
    mc.k = m.at("k");
    mc.max_len = m.at("max_len");
    c.model.variant = parse_variant(m.at("variant").get<std::string>());

    const auto& t = h.at("train");
    c.train.learning_rate = t.at("learning_rate");
    c.train.batch_size = t.at("batch_size");
    c.train.epochs = t.at("epochs");
    c.train.negatives_per_doc = t.at("negatives_per_doc");
    c.train.seed = t.at("seed");
    c.train.finetune_word_vectors = t.at("finetune_word_vectors");

    const auto& a = h.at("adam");
    c.state.adam.config = {a.at("beta1"), a.at("beta2"), a.at("eps")};
    c.state.adam.step = a.at("step");
    c.state.epoch = h.at("epoch");
    c.state.loss_history = h.at("loss_history").get<std::vector<double>>();
    c.vocab = Vocabulary::from_tokens(h.at("vocabulary").get<std::vector<std::string>>());
    if (c.vocab.size() != mc.vocab_size) throw FormatError("checkpoint: vocabulary size disagrees with config");

    if (h.at("payload_bytes").get<std::size_t>() != payload.size()) {
      throw FormatError("checkpoint: payload is " + std::to_string(payload.size()) + " bytes, header declares " +
                        std::to_string(h.at("payload_bytes").get<std::size_t>()));
    }
    std::ostringstream cs;
    cs << std::hex << detail::fnv1a(payload);
    if (cs.str() != h.at("payload_fnv1a").get<std::string>()) throw FormatError("checkpoint: payload checksum mismatch");

    // Allocate tensors from the header, then check them against the config.
    c.model.params = init_params(mc, 0);
    const auto& table = h.at("tensors");
    const std::size_t n_params = c.model.params.named().size();
    std::size_t n_adam = 0;
    bool has_labels = false;
    for (const auto& e : table) {
      const auto name = e.at("name").get<std::string>();
      if (name.rfind("adam.m.", 0) == 0) ++n_adam;
      if (name == "label_matrix") has_labels = true;
    }
    c.state.adam.m.assign(n_adam, Matrix());
    c.state.adam.v.assign(n_adam, Matrix());
    if (has_labels) c.model.label_matrix = Matrix(mc.r, mc.k);
    auto slots = detail::tensor_slots(c);
    if (slots.size() != table.size() || (n_adam != 0 && n_adam != n_params)) {
      throw FormatError("checkpoint: unexpected tensor table");
    }
    std::size_t at = 0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& e = table[i];
      const std::size_t rows = e.at("rows"), cols = e.at("cols");
      if (e.at("name").get<std::string>() != slots[i].name) {
        throw FormatError("checkpoint: tensor " + std::to_string(i) + " is '" + e.at("name").get<std::string>() +
                          "', expected '" + slots[i].name + "'");
      }
      if (!slots[i].value->empty() && (slots[i].value->rows() != rows || slots[i].value->cols() != cols)) {
        throw FormatError("checkpoint: tensor '" + slots[i].name + "' has shape " + Matrix::shape_string(rows, cols) +
                          ", config implies " + slots[i].value->shape());
      }
      Matrix mat(rows, cols);
      if (at + mat.size() * 8 > payload.size()) throw FormatError("checkpoint: payload truncated");
      for (std::size_t j = 0; j < mat.size(); ++j, at += 8) {
        mat[j] = std::bit_cast<double>(detail::get_le<std::uint64_t>(payload, at));
      }
      *slots[i].value = std::move(mat);
    }
    if (at != payload.size()) throw FormatError("checkpoint: trailing payload bytes");
    for (std::size_t i = 0; i < n_adam; ++i) {
      if (!c.state.adam.m[i].same_shape(*slots[i].value)) throw FormatError("checkpoint: moment shape mismatch");
    }
    check_shapes(c.model.params, mc);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_file_atomic(path, serialize_checkpoint(c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

}  // namespace laha
