#ifndef AIRFI_DATA_AUGMENT_HPP
#define AIRFI_DATA_AUGMENT_HPP

#include "airfi/csi.hpp"

#include <cstdint>
#include <optional>

namespace airfi {

struct DataAugConfig {
  // Noise level for the Gaussian copies; when unset it defaults to
  // default_noise_std(input).
  std::optional<float> noise_std;
  int copies_per_sample = 1;
  std::uint64_t seed = 0;
};

// 5% of the global amplitude standard deviation of the dataset (or of the
// union of several datasets).
float default_noise_std(const Dataset& ds);
float default_noise_std(const std::vector<const Dataset*>& datasets);

// Returns the originals (in order) followed by copies_per_sample noisy copies
// of each sample, grouped by original. Labels and env ids are preserved.
Dataset augment_gaussian(const Dataset& ds, const DataAugConfig& cfg);

// Same contract, appending the copies to ds directly; cfg.noise_std must be
// set (the in-place form cannot defer to the pre-noise statistics afterwards).
void append_gaussian_copies(Dataset& ds, const DataAugConfig& cfg);

}  // namespace airfi

#endif  // AIRFI_DATA_AUGMENT_HPP
