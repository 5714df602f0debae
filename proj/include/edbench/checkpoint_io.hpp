#pragma once

#include <string>
#include <string_view>

#include "edbench/model.hpp"

// Checkpoint file format (version 1):
//
//   bytes 0..3   magic "TLM1"
//   bytes 4..7   format version, u32 little-endian (currently 1)
//   bytes 8..15  header length in bytes, u64 little-endian
//   header       UTF-8 JSON: {"config":{...},"tokenizer":{...},"provenance":"..."}
//   blocks       parameter blocks as row-major little-endian float32 arrays,
//                no padding, in the fixed order defined by visit_blocks():
//                tok_emb, pos_emb, then per layer ln1_g, ln1_b, wq, bq, wk,
//                bk, wv, bv, wo, bo, ln2_g, ln2_b, w_in, b_in, w_out, b_out,
//                then lnf_g, lnf_b, unembed.
//
// Save/load round-trips are bit-exact; files are portable across platforms.

namespace edbench {

std::string checkpoint_to_bytes(const Checkpoint& ckpt);
Checkpoint checkpoint_from_bytes(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace edbench
