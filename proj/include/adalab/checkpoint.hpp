#pragma once

#include <string>

#include "adalab/tape.hpp"

namespace adalab {

// Checkpoint file: magic "ADTC", u16 version (1), then one record per tensor:
// u16 name length, UTF-8 name, u8 ndim, dims as u64 little-endian, payload as
// f32 little-endian. Records are written in store order. A sidecar JSON
// manifest (<path>.manifest.json) lists names, shapes, and the content hash.
void save_checkpoint(const ParamStore& params, const std::string& path);

// Loads a checkpoint, widening payloads to f64. Verifies the sidecar content
// hash when present; mismatch raises ChecksumError.
ParamStore load_checkpoint(const std::string& path, bool verify_hash = true);

std::string checkpoint_manifest_path(const std::string& path);

}  // namespace adalab
