#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dso/bernoulli.hpp"

namespace dso {

enum class MaskMode { Unit, Connection };

/// Network shape plus the mapping from mask bits to gated entities.
///
/// Unit mode: a plain MLP chain. Every hidden unit carries one bit; bits are
/// numbered layer by layer, first hidden layer first.
///
/// Connection mode: a densely wired block. Each of the block_layers hidden
/// layers (all of growth width) and the final output layer receives the
/// concatenated outputs of the block input and every earlier block layer.
/// Each (source, target) pair carries one bit that gates the whole slice of
/// weights between them.
class MaskedTopology {
public:
    /// One gated (or in unit mode, ungated) source slice feeding a target layer.
    struct Segment {
        int source;  ///< producing layer: 0 = input, t = output of target t
        int offset;  ///< column offset of this slice inside the target's weight matrix
        int width;   ///< source width
        int bit;     ///< gating bit index, -1 if this slice is never gated

        bool operator==(const Segment&) const = default;
    };

    /// widths = input, hidden..., output. Requires at least one hidden layer.
    /// (Training additionally needs mask_dim() >= 3 for the theta bounds.)
    static MaskedTopology unit_mlp(const std::vector<int>& widths);

    /// Dense block: input_width -> block_layers layers of growth width each
    /// -> output_width, with d = (block_layers + 1)(block_layers + 2) / 2 bits.
    static MaskedTopology dense_block(int input_width, int growth, int block_layers,
                                      int output_width);

    MaskMode mode() const { return mode_; }
    int mask_dim() const { return mask_dim_; }

    int input_width() const { return widths_.front(); }
    int output_width() const { return widths_.back(); }

    /// Number of target layers (hidden layers plus the output layer).
    int target_count() const { return static_cast<int>(widths_.size()) - 1; }
    /// Output width of layer t; t = 0 is the network input.
    int layer_width(int t) const { return widths_[static_cast<std::size_t>(t)]; }
    /// Total concatenated input width of target t (t in 1..target_count()).
    int concat_width(int t) const;

    const std::vector<Segment>& incoming(int target) const {
        return segments_[static_cast<std::size_t>(target) - 1];
    }

    /// Unit mode only: [begin, end) bit range gating the units of hidden layer h
    /// (h in 0..hidden_count-1, i.e. target h+1).
    std::pair<int, int> unit_bit_range(int hidden_layer) const;
    int hidden_layer_count() const { return target_count() - 1; }

    int block_layers() const { return block_layers_; }
    int growth() const { return growth_; }

    long long weight_param_count() const;  ///< weights only, biases excluded
    long long total_param_count() const;   ///< weights plus biases

    /// Reporting groups: one per hidden layer in unit mode, one per block in
    /// connection mode. Returns the number of active bits in each group.
    int group_count() const;
    std::vector<int> selected_counts(const StructureMask& mask) const;

    std::string to_string() const;
    static MaskedTopology parse(const std::string& text);

    bool operator==(const MaskedTopology&) const = default;

private:
    MaskedTopology() = default;
    void build_segments();

    MaskMode mode_ = MaskMode::Unit;
    std::vector<int> widths_;                       // input, targets 1..T
    std::vector<std::vector<Segment>> segments_;    // per target, 1-based -> index t-1
    int mask_dim_ = 0;
    int block_layers_ = 0;  // connection mode only
    int growth_ = 0;        // connection mode only
};

} // namespace dso
