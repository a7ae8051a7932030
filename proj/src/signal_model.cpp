#include "spoofsim/signal_model.hpp"

#include <cmath>
#include <string>

#include "spoofsim/errors.hpp"

namespace spoofsim {

const char* to_string(NodeId id) {
    switch (id) {
        case NodeId::T: return "T";
        case NodeId::R: return "R";
        case NodeId::AT: return "A_T";
        case NodeId::AR: return "A_R";
    }
    return "?";
}

double distance(const Position& a, const Position& b) { return std::hypot(a.x - b.x, a.y - b.y); }

void IqFrame::validate() const {
    if (samples.size() != kSamplesPerFrame) {
        throw ShapeError("IqFrame holds " + std::to_string(samples.size()) + " samples, expected " +
                         std::to_string(kSamplesPerFrame));
    }
    for (const auto& s : samples) {
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) {
            throw NumericError("IqFrame contains a non-finite sample");
        }
    }
}

double wrap_phase(double radians) {
    double r = std::fmod(radians, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    // fmod of a tiny negative value can round up to exactly 2pi.
    if (r >= kTwoPi) r = 0.0;
    return r;
}

double qpsk_phase(unsigned bit_pair) {
    switch (bit_pair & 0x3u) {
        case 0b00: return kPi / 4.0;
        case 0b01: return 3.0 * kPi / 4.0;
        case 0b11: return 5.0 * kPi / 4.0;
        default: return 7.0 * kPi / 4.0;  // 0b10
    }
}

unsigned payload_symbol(Payload bits, std::size_t m) {
    return (static_cast<unsigned>(bits) >> (6 - 2 * m)) & 0x3u;
}

ChannelRealization draw_channel(double distance, const ChannelModel& model, RandomStream& rng) {
    if (!(distance > 0.0) || !std::isfinite(distance)) {
        throw GeometryError("channel distance must be positive and finite, got " + std::to_string(distance));
    }
    ChannelRealization ch;
    ch.gain = rng.exponential(1.0 / (distance * distance));
    switch (model.phase_model) {
        case PhaseModel::Uniform:
            ch.phase = wrap_phase(kTwoPi * rng.uniform());
            break;
        case PhaseModel::PropagationScatter:
            ch.phase = wrap_phase(kTwoPi * distance / model.wavelength + model.scatter_std * rng.normal());
            break;
    }
    return ch;
}

namespace {

// Fills a frame whose symbol m has carrier phase phi_m + offset.
IqFrame build_frame(Payload bits, double amplitude, double offset, SourceLabel label) {
    IqFrame frame;
    frame.samples.resize(kSamplesPerFrame);
    frame.bit_payload = bits;
    frame.source_label = label;
    for (std::size_t m = 0; m < kSymbolsPerFrame; ++m) {
        const double base = qpsk_phase(payload_symbol(bits, m)) + offset;
        for (std::size_t k = 0; k < kSamplesPerSymbol; ++k) {
            frame.samples[m * kSamplesPerSymbol + k] =
                std::polar(amplitude, base + static_cast<double>(k) * kSampleRotation);
        }
    }
    return frame;
}

void require_power(const NodeConfig& node) {
    if (!(node.transmit_power > 0.0)) {
        throw ConfigError(std::string("node ") + to_string(node.id) + " needs positive transmit power");
    }
}

}  // namespace

IqFrame synthesize_direct_frame(Payload bits, const NodeConfig& tx, const ChannelRealization& channel) {
    require_power(tx);
    const auto label = tx.id == NodeId::T ? SourceLabel::Intended : SourceLabel::Other;
    return build_frame(bits, channel.gain * tx.transmit_power, tx.device_phase + channel.phase, label);
}

IqFrame synthesize_replay_frame(Payload original_bits, const NodeConfig& source, const NodeConfig& relay,
                                const ChannelRealization& source_to_relay,
                                const ChannelRealization& relay_to_rx) {
    require_power(relay);
    const double offset = source.device_phase + source_to_relay.phase + relay.device_phase + relay_to_rx.phase;
    return build_frame(original_bits, relay_to_rx.gain * relay.transmit_power, offset, SourceLabel::Other);
}

IqFrame synthesize_random_frame(const NodeConfig& tx, const ChannelRealization& channel, RandomStream& rng) {
    const auto bits = static_cast<Payload>(rng.next_u64() & 0xFFu);
    IqFrame frame = synthesize_direct_frame(bits, tx, channel);
    frame.source_label = SourceLabel::Other;
    return frame;
}

Eigen::VectorXd frame_to_features(const IqFrame& frame) {
    frame.validate();
    Eigen::VectorXd f(kFeatureWidth);
    for (std::size_t i = 0; i < kSamplesPerFrame; ++i) {
        f[2 * i] = frame.samples[i].real();
        f[2 * i + 1] = frame.samples[i].imag();
    }
    return f;
}

FeatureMatrix frames_to_features(std::span<const IqFrame> frames) {
    FeatureMatrix m(static_cast<Eigen::Index>(frames.size()), static_cast<Eigen::Index>(kFeatureWidth));
    for (std::size_t r = 0; r < frames.size(); ++r) {
        m.row(static_cast<Eigen::Index>(r)) = frame_to_features(frames[r]).transpose();
    }
    return m;
}

std::vector<ComplexSample> features_to_samples(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    if (row.size() != static_cast<Eigen::Index>(kFeatureWidth)) {
        throw ShapeError("feature row has width " + std::to_string(row.size()));
    }
    std::vector<ComplexSample> out(kSamplesPerFrame);
    for (std::size_t i = 0; i < kSamplesPerFrame; ++i) {
        out[i] = {row[static_cast<Eigen::Index>(2 * i)], row[static_cast<Eigen::Index>(2 * i + 1)]};
    }
    return out;
}

}  // namespace spoofsim
