#pragma once

// Binary checkpoint layout (all integers little-endian):
//
//   "HGCK"                      magic
//   u32 version                 currently 1
//   u32 n, n bytes              config block: key=value lines (model config,
//                               step, task, source_tokens, target_tokens)
//   u32 count                   number of tensor records
//   per tensor:
//     u32 n, n bytes            name
//     u8  precision             4 = f32, 8 = f64
//     u32 rank, rank x u64      dims
//     values                    row-major, little-endian IEEE-754

#include <cstdint>
#include <filesystem>
#include <string>

#include "hiergen/model.hpp"
#include "hiergen/vocab.hpp"

namespace hiergen {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class Precision : std::uint8_t { kF32 = 4, kF64 = 8 };

template <typename Real>
constexpr Precision precision_of() {
  return sizeof(Real) == 4 ? Precision::kF32 : Precision::kF64;
}

template <typename Real>
struct LoadedModel {
  Seq2SeqModel<Real> model;
  Vocabulary source_vocab;
  Vocabulary target_vocab;
  std::string task;  // empty when saved without one
};

template <typename Real>
void save_checkpoint(const std::filesystem::path& path, const Seq2SeqModel<Real>& model, const Vocabulary& source_vocab,
                     const Vocabulary& target_vocab, const std::string& task = {});

// Values stored at another precision are converted. Throws
// CorruptCheckpoint on bad magic or truncation and IncompatibleCheckpoint on
// an unknown version.
template <typename Real>
LoadedModel<Real> load_checkpoint(const std::filesystem::path& path);

// Precision of the first tensor record.
Precision checkpoint_precision(const std::filesystem::path& path);

}  // namespace hiergen
