#include "dso/topology.hpp"

#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dso {

MaskedTopology MaskedTopology::unit_mlp(const std::vector<int>& widths) {
    if (widths.size() < 3) {
        throw std::invalid_argument("unit_mlp: need input, at least one hidden, output");
    }
    for (int w : widths) {
        if (w < 1) throw std::invalid_argument("unit_mlp: layer widths must be positive");
    }
    MaskedTopology topo;
    topo.mode_ = MaskMode::Unit;
    topo.widths_ = widths;
    topo.mask_dim_ = std::accumulate(widths.begin() + 1, widths.end() - 1, 0);
    topo.build_segments();
    return topo;
}

MaskedTopology MaskedTopology::dense_block(int input_width, int growth, int block_layers,
                                           int output_width) {
    if (input_width < 1 || growth < 1 || output_width < 1) {
        throw std::invalid_argument("dense_block: widths must be positive");
    }
    if (block_layers < 1) {
        throw std::invalid_argument("dense_block: need at least one block layer");
    }
    MaskedTopology topo;
    topo.mode_ = MaskMode::Connection;
    topo.block_layers_ = block_layers;
    topo.growth_ = growth;
    topo.widths_.push_back(input_width);
    for (int l = 0; l < block_layers; ++l) topo.widths_.push_back(growth);
    topo.widths_.push_back(output_width);
    // Targets 1..L are block layers, target L+1 is the output layer; every
    // target consumes all earlier outputs, one bit per (source, target) pair.
    topo.mask_dim_ = (block_layers + 1) * (block_layers + 2) / 2;
    topo.build_segments();
    return topo;
}

void MaskedTopology::build_segments() {
    segments_.clear();
    segments_.resize(static_cast<std::size_t>(target_count()));
    if (mode_ == MaskMode::Unit) {
        for (int t = 1; t <= target_count(); ++t) {
            segments_[static_cast<std::size_t>(t) - 1].push_back(
                Segment{t - 1, 0, layer_width(t - 1), -1});
        }
        return;
    }
    int bit = 0;
    for (int t = 1; t <= target_count(); ++t) {
        int offset = 0;
        auto& segs = segments_[static_cast<std::size_t>(t) - 1];
        for (int s = 0; s < t; ++s) {
            segs.push_back(Segment{s, offset, layer_width(s), bit++});
            offset += layer_width(s);
        }
    }
}

int MaskedTopology::concat_width(int t) const {
    const auto& segs = incoming(t);
    int total = 0;
    for (const auto& seg : segs) total += seg.width;
    return total;
}

std::pair<int, int> MaskedTopology::unit_bit_range(int hidden_layer) const {
    if (mode_ != MaskMode::Unit) {
        throw std::logic_error("unit_bit_range: not a unit-mask topology");
    }
    if (hidden_layer < 0 || hidden_layer >= hidden_layer_count()) {
        throw std::out_of_range("unit_bit_range: hidden layer index out of range");
    }
    int begin = 0;
    for (int h = 0; h < hidden_layer; ++h) begin += layer_width(h + 1);
    return {begin, begin + layer_width(hidden_layer + 1)};
}

long long MaskedTopology::weight_param_count() const {
    long long total = 0;
    for (int t = 1; t <= target_count(); ++t) {
        total += static_cast<long long>(layer_width(t)) * concat_width(t);
    }
    return total;
}

long long MaskedTopology::total_param_count() const {
    long long total = weight_param_count();
    for (int t = 1; t <= target_count(); ++t) total += layer_width(t);
    return total;
}

int MaskedTopology::group_count() const {
    return mode_ == MaskMode::Unit ? hidden_layer_count() : 1;
}

std::vector<int> MaskedTopology::selected_counts(const StructureMask& mask) const {
    if (static_cast<int>(mask.dim()) != mask_dim_) {
        throw std::invalid_argument("selected_counts: mask dimension mismatch");
    }
    std::vector<int> counts;
    if (mode_ == MaskMode::Unit) {
        for (int h = 0; h < hidden_layer_count(); ++h) {
            auto [begin, end] = unit_bit_range(h);
            int n = 0;
            for (int i = begin; i < end; ++i) n += mask.bits[static_cast<std::size_t>(i)];
            counts.push_back(n);
        }
    } else {
        counts.push_back(mask.count_ones());
    }
    return counts;
}

std::string MaskedTopology::to_string() const {
    std::ostringstream out;
    if (mode_ == MaskMode::Unit) {
        out << "unit:";
        for (std::size_t i = 0; i < widths_.size(); ++i) {
            if (i > 0) out << '-';
            out << widths_[i];
        }
    } else {
        out << "conn:" << input_width() << '-' << growth_ << '-' << block_layers_ << '-'
            << output_width();
    }
    return out.str();
}

MaskedTopology MaskedTopology::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw std::invalid_argument("MaskedTopology::parse: missing mode prefix in '" + text + "'");
    }
    const std::string head = text.substr(0, colon);
    std::vector<int> numbers;
    {
        std::istringstream in(text.substr(colon + 1));
        std::string piece;
        while (std::getline(in, piece, '-')) {
            if (piece.empty()) throw std::invalid_argument("MaskedTopology::parse: bad widths");
            numbers.push_back(std::stoi(piece));
        }
    }
    if (head == "unit") {
        return unit_mlp(numbers);
    }
    if (head == "conn") {
        if (numbers.size() != 4) {
            throw std::invalid_argument("MaskedTopology::parse: conn expects 4 numbers");
        }
        return dense_block(numbers[0], numbers[1], numbers[2], numbers[3]);
    }
    throw std::invalid_argument("MaskedTopology::parse: unknown mode '" + head + "'");
}

} // namespace dso
