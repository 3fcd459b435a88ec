#pragma once
#include <string>
#include <utility>

#include "eoslab/model.hpp"

namespace eoslab {

// Text checkpoint, format version 1 (full layout in docs/formats.md):
// a token stream of keyword-tagged sections
//
//   eoslab-checkpoint v1
//   d <int>  m <int>  J <int>
//   fields   (J lines of m zero-based coordinate indices)
//   K <int>
//   w        (K lines of m hexfloats)
//   b        (K hexfloats)
//   v        (K hexfloats)
//   beta     (one hexfloat)
//
// Hexfloat payloads round-trip exactly, so save/load is the identity on the
// parameter values.
std::string checkpoint_text(const ModelParams& p, const ReceptiveFields& fields);
void save_checkpoint(const std::string& path, const ModelParams& p,
                     const ReceptiveFields& fields);

struct Checkpoint {
  ModelParams params;
  ReceptiveFields fields;
};

Checkpoint parse_checkpoint(const std::string& text);  // throws std::runtime_error
Checkpoint load_checkpoint(const std::string& path);

}  // namespace eoslab
