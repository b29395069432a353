#ifndef AIRFI_CHECKPOINT_HPP
#define AIRFI_CHECKPOINT_HPP

#include "airfi/model.hpp"

#include <filesystem>

namespace airfi {

// Single-file binary checkpoint: magic + embedded JSON index (tensor names,
// shapes, offsets, model geometry) + raw float32 blob + FNV-1a checksum.
// Round-trips bit-exactly: save -> load -> save produces identical bytes.
void save_checkpoint(const TrainedModel<float>& tm,
                     const std::filesystem::path& path);

// Throws kVersionMismatch on wrong magic/format, kCorruptCheckpoint on
// checksum or index inconsistencies, kMissingFile / kIoFailure on I/O.
TrainedModel<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace airfi

#endif  // AIRFI_CHECKPOINT_HPP
