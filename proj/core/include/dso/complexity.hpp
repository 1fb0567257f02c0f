#pragma once

#include <span>
#include <vector>

#include "dso/bernoulli.hpp"
#include "dso/topology.hpp"

namespace dso {

/// Per-bit model-complexity weights c. All entries are >= 0 and at least one
/// is positive, so that eps = eps_prime / max(c) is well defined.
struct ComplexityCoefficients {
    std::vector<double> values;

    explicit ComplexityCoefficients(std::vector<double> v);

    std::size_t dim() const { return values.size(); }
    double max() const;
    operator std::span<const double>() const { return values; }
};

/// Unit selection: every unit costs the same, c = (1, ..., 1).
ComplexityCoefficients unit_selection_coeffs(int dim);

/// Connection selection: c_i is the number of scalar weights gated by bit i,
/// i.e. source width times target width of the gated slice.
ComplexityCoefficients connection_selection_coeffs(const MaskedTopology& topology);

/// Picks the coefficient rule matching the topology's mask mode.
ComplexityCoefficients coefficients_for(const MaskedTopology& topology);

/// Fraction of the base network's weight parameters still active under the
/// mask. A weight survives in unit mode when both of its endpoint units are
/// active (input and output units always are); in connection mode when its
/// slice's bit is on. Biases are not counted.
double weight_usage_rate(const MaskedTopology& topology, const StructureMask& mask);

} // namespace dso
