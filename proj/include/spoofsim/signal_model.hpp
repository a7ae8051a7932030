#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "spoofsim/rng.hpp"

namespace spoofsim {

inline constexpr std::size_t kSymbolsPerFrame = 4;
inline constexpr std::size_t kSamplesPerSymbol = 100;
inline constexpr std::size_t kSamplesPerFrame = kSymbolsPerFrame * kSamplesPerSymbol;
inline constexpr std::size_t kFeatureWidth = 2 * kSamplesPerFrame;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
/// Per-sample carrier rotation inside a symbol.
inline constexpr double kSampleRotation = kPi / 50.0;

using ComplexSample = std::complex<double>;
/// Batch convention everywhere: one row per frame.
using FeatureMatrix = Eigen::MatrixXd;

enum class NodeId { T, R, AT, AR };
enum class SourceLabel { Intended, Other };

const char* to_string(NodeId id);

struct Position {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Position&, const Position&) = default;
};

double distance(const Position& a, const Position& b);

struct NodeConfig {
    NodeId id = NodeId::T;
    Position position;
    double transmit_power = 0.0;  // P
    double device_phase = 0.0;    // radians, [0, 2pi)
};

/// One fading draw for a directed link.
struct ChannelRealization {
    double gain = 0.0;   // power-gain units; amplitude factor in the sample equation
    double phase = 0.0;  // radians, [0, 2pi)

    friend bool operator==(const ChannelRealization&, const ChannelRealization&) = default;
};

enum class PhaseModel {
    /// Phase uniform on [0, 2pi) for every draw.
    Uniform,
    /// Deterministic propagation phase 2*pi*d/wavelength plus zero-mean
    /// Gaussian scatter of std scatter_std.
    PropagationScatter,
};

struct ChannelModel {
    PhaseModel phase_model = PhaseModel::PropagationScatter;
    double wavelength = 100.0;
    double scatter_std = 0.1;
};

/// 8-bit payload; symbol m uses bits (7-2m, 6-2m), most significant pair first.
using Payload = std::uint8_t;

struct IqFrame {
    std::vector<ComplexSample> samples;  // kSamplesPerFrame entries
    std::optional<Payload> bit_payload;
    SourceLabel source_label = SourceLabel::Other;

    /// Throws NumericError / ShapeError when the frame violates its invariants.
    void validate() const;
};

double wrap_phase(double radians);

/// Gray-mapped QPSK phase: 00->pi/4, 01->3pi/4, 11->5pi/4, 10->7pi/4.
double qpsk_phase(unsigned bit_pair);

/// Symbol m's bit pair (0..3) out of an 8-bit payload.
unsigned payload_symbol(Payload bits, std::size_t m);

/// Rayleigh power gain ~ Exp(mean d^-2), then phase per the phase model.
/// Consumes exactly two uniform draws: the first for the gain, the second
/// for the phase. Throws GeometryError for distance <= 0.
ChannelRealization draw_channel(double distance, const ChannelModel& model, RandomStream& rng);

/// Direct transmission tx -> rx:
/// sample k of symbol m = gain * P * exp(j(phi_m + theta_tx + theta_ch + k*pi/50)).
IqFrame synthesize_direct_frame(Payload bits, const NodeConfig& tx, const ChannelRealization& channel);

/// Amplify-and-forward of a recorded T frame by relay A_T. The relay restores
/// amplitude to its own power P, so only the relay->receiver gain scales the
/// sample while every phase term accumulates.
IqFrame synthesize_replay_frame(Payload original_bits, const NodeConfig& source, const NodeConfig& relay,
                                const ChannelRealization& source_to_relay,
                                const ChannelRealization& relay_to_rx);

/// Frame of uniformly random bits from tx (one engine draw for the payload).
IqFrame synthesize_random_frame(const NodeConfig& tx, const ChannelRealization& channel, RandomStream& rng);

/// Interleaved (re, im) pairs in sample order, length kFeatureWidth.
Eigen::VectorXd frame_to_features(const IqFrame& frame);

/// Stacks frame_to_features rows into an N x kFeatureWidth matrix.
FeatureMatrix frames_to_features(std::span<const IqFrame> frames);

/// Inverse of the interleaving, for a single feature row.
std::vector<ComplexSample> features_to_samples(const Eigen::Ref<const Eigen::RowVectorXd>& row);

}  // namespace spoofsim
