#pragma once

#include "occ/errors.hpp"

#include <algorithm>

namespace occ::nn {

// Contrastive loss over an embedding distance d with pair label y
// (0 = same source, 1 = different sources) and margin m:
//   L = (1-y) * 1/2 * d^2  +  y * 1/2 * max(0, m-d)^2
inline float contrastive_loss(float d, int y, float m) {
  if (d < 0) throw DomainError("contrastive_loss: negative distance");
  if (m <= 0) throw DomainError("contrastive_loss: margin must be > 0");
  if (y != 0 && y != 1) throw DomainError("contrastive_loss: label not 0/1");
  if (y == 0) return 0.5f * d * d;
  const float gap = std::max(0.0f, m - d);
  return 0.5f * gap * gap;
}

// dL/dd. The y=1, d=0 corner is non-differentiable; the zero subgradient is
// used there so identical-pair steps stay exact no-ops.
inline float contrastive_loss_ddist(float d, int y, float m) {
  if (y == 0) return d;
  const float gap = m - d;
  return gap > 0 ? -gap : 0.0f;
}

}  // namespace occ::nn
