#pragma once

#include "tvnet/grid.hpp"
#include "tvnet/grid_ops.hpp"

namespace tvnet {

/// A scalar loss together with its derivative with respect to the flow it
/// was evaluated on.
struct LossValue {
  double value = 0.0;
  FlowField seed;
};

/// Magnitudes above this in a flow file mark unknown ground truth.
inline constexpr double kUnknownFlowThreshold = 1e9;

/// 1 where both components are finite and within kUnknownFlowThreshold, else 0.
Grid validity_mask(const FlowField& gt);

/// Average end-point error over pixels where mask is non-zero (all pixels
/// when mask is null). Throws std::invalid_argument when no pixel is valid.
LossValue epe(const FlowField& pred, const FlowField& gt, const Grid* mask = nullptr);

/// The un-linearized TV-L1 energy of a flow, with |.| smoothed to
/// sqrt(.^2 + 1e-12) so it can be differentiated:
///   sum |grad u1| + |grad u2| + lambda |I1(x + u) - I0(x)|.
LossValue flow_energy(const Image& I0, const Image& I1, const FlowField& flow, double lambda,
                      const DifferenceKernels& kernels = DifferenceKernels::initial());

/// task + lambda_mix * flow, for both the value and the seed.
LossValue multitask_combine(const LossValue& task, const LossValue& flow,
                            double lambda_mix = 0.1);

}  // namespace tvnet
