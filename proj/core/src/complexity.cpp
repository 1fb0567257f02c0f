#include "dso/complexity.hpp"

#include <algorithm>
#include <stdexcept>

namespace dso {

ComplexityCoefficients::ComplexityCoefficients(std::vector<double> v) : values(std::move(v)) {
    if (values.empty()) {
        throw std::invalid_argument("ComplexityCoefficients: empty vector");
    }
    bool any_positive = false;
    for (double c : values) {
        if (c < 0.0) throw std::invalid_argument("ComplexityCoefficients: negative entry");
        any_positive = any_positive || c > 0.0;
    }
    if (!any_positive) {
        throw std::invalid_argument("ComplexityCoefficients: all entries are zero");
    }
}

double ComplexityCoefficients::max() const {
    return *std::max_element(values.begin(), values.end());
}

ComplexityCoefficients unit_selection_coeffs(int dim) {
    if (dim < 3) {
        throw std::invalid_argument("unit_selection_coeffs: dimension must be >= 3");
    }
    return ComplexityCoefficients(std::vector<double>(static_cast<std::size_t>(dim), 1.0));
}

ComplexityCoefficients connection_selection_coeffs(const MaskedTopology& topology) {
    if (topology.mode() != MaskMode::Connection) {
        throw std::invalid_argument("connection_selection_coeffs: topology has no connection masks");
    }
    std::vector<double> c(static_cast<std::size_t>(topology.mask_dim()), 0.0);
    for (int t = 1; t <= topology.target_count(); ++t) {
        for (const auto& seg : topology.incoming(t)) {
            c[static_cast<std::size_t>(seg.bit)] =
                static_cast<double>(seg.width) * topology.layer_width(t);
        }
    }
    return ComplexityCoefficients(std::move(c));
}

ComplexityCoefficients coefficients_for(const MaskedTopology& topology) {
    return topology.mode() == MaskMode::Unit ? unit_selection_coeffs(topology.mask_dim())
                                             : connection_selection_coeffs(topology);
}

double weight_usage_rate(const MaskedTopology& topology, const StructureMask& mask) {
    if (static_cast<int>(mask.dim()) != topology.mask_dim()) {
        throw std::invalid_argument("weight_usage_rate: mask dimension mismatch");
    }
    const long long total = topology.weight_param_count();

    if (topology.mode() == MaskMode::Connection) {
        long long active = 0;
        for (int t = 1; t <= topology.target_count(); ++t) {
            for (const auto& seg : topology.incoming(t)) {
                if (mask.bits[static_cast<std::size_t>(seg.bit)]) {
                    active += static_cast<long long>(seg.width) * topology.layer_width(t);
                }
            }
        }
        return static_cast<double>(active) / static_cast<double>(total);
    }

    // Unit mode: count active units per layer; input and output are never gated.
    std::vector<long long> active(static_cast<std::size_t>(topology.target_count()) + 1);
    active[0] = topology.input_width();
    active[static_cast<std::size_t>(topology.target_count())] = topology.output_width();
    for (int h = 0; h < topology.hidden_layer_count(); ++h) {
        auto [begin, end] = topology.unit_bit_range(h);
        long long n = 0;
        for (int i = begin; i < end; ++i) n += mask.bits[static_cast<std::size_t>(i)];
        active[static_cast<std::size_t>(h) + 1] = n;
    }
    long long surviving = 0;
    for (int t = 1; t <= topology.target_count(); ++t) {
        surviving += active[static_cast<std::size_t>(t) - 1] * active[static_cast<std::size_t>(t)];
    }
    return static_cast<double>(surviving) / static_cast<double>(total);
}

} // namespace dso
