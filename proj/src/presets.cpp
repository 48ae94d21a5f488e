#include "nce/config.hpp"

#include "presets_data.hpp"

namespace nce {

const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = {
      {"gauss1d_r16", "1-d Gaussian means 16 vs 0, GD vs NGD on NCE and eNCE, batch gradients",
       std::string(preset_text::gauss1d_r16)},
      {"gauss16d", "16-d diagonal Gaussians, data variances U[6,12], batch gradients",
       std::string(preset_text::gauss16d)},
      {"verify_default", "landscape certification at R = 4, 6, 8", std::string(preset_text::verify_default)},
  };
  return all;
}

const Preset* find_preset(const std::string& name) {
  for (const Preset& p : presets()) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

}  // namespace nce
