#pragma once

#include "tnnswap/nn/tape.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tnnswap::nn {

enum class Activation { tanh, identity };

/// Fully connected layer: activation(W x + b).
struct DenseLayer {
    Matrix weight;  // [out x in]
    Matrix bias;    // [out x 1]
    Activation activation = Activation::tanh;

    std::size_t in() const { return static_cast<std::size_t>(weight.cols()); }
    std::size_t out() const { return static_cast<std::size_t>(weight.rows()); }
    std::size_t param_count() const { return out() * in() + out(); }
};

/// Two-node matrix product operator layer of width phys^2.
///
/// Core A_alpha[i, j] is stored at w1(i, alpha * phys + j), i.e. w1 flattened
/// row-major is the rank-3 tensor [phys x chi x phys]; w2 holds B likewise.
/// The contracted weight is W = sum_alpha A_alpha (x) B_alpha with
/// W[i1*phys + i2, j1*phys + j2] = sum_alpha A_alpha[i1, j1] B_alpha[i2, j2].
struct MpoLayer {
    std::size_t phys = 0;
    std::size_t chi = 0;
    Matrix w1;    // [phys x chi*phys]
    Matrix w2;    // [phys x chi*phys]
    Matrix bias;  // [phys^2 x 1]
    Activation activation = Activation::tanh;

    std::size_t width() const { return phys * phys; }
    std::size_t param_count() const { return 2 * chi * phys * phys + phys * phys; }
    Matrix weight() const { return contract_mpo(w1, w2, phys, chi); }
};

using Layer = std::variant<DenseLayer, MpoLayer>;

enum class ArchFamily { dnn, tnn };

/// Architecture of a value network: input -> hidden layers -> scalar.
///
/// DNN: every hidden layer is dense. TNN: the first hidden layer is dense and
/// maps the input to hidden[0]; every later hidden layer is an MPO layer of the
/// same (perfect-square) width. The output layer is dense with identity
/// activation; hidden activations are tanh.
struct ArchSpec {
    ArchFamily family = ArchFamily::dnn;
    std::vector<std::size_t> hidden;
    std::size_t chi = 2;
    std::size_t input_width = 7;

    /// "tnn:2x64" (layers x neurons) or "dnn:24,27" (explicit widths).
    static ArchSpec parse(std::string_view text, std::size_t chi = 2, std::size_t input_width = 7);
    std::string to_string() const;
    void validate() const;
};

std::size_t param_count(const ArchSpec& arch);

class Network {
public:
    /// Widths must chain; the last layer must have width 1.
    explicit Network(std::vector<Layer> layers);

    /// Dense weights ~ U(+-sqrt(6/(fan_in+fan_out))), biases zero. MPO cores are
    /// i.i.d. normal with std (sigma^2/chi)^(1/4), sigma^2 = 2/(2 phys^2), so the
    /// contracted weight entries have the Glorot variance of the equivalent
    /// dense layer.
    static Network init(const ArchSpec& arch, std::uint64_t seed);

    std::size_t input_width() const;
    std::size_t param_count() const;
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    /// Constant per-column factor applied to inputs before the first layer.
    /// Not trainable; input gradients are with respect to the unscaled inputs.
    const Vector& input_scale() const { return input_scale_; }
    void set_input_scale(Vector scale);

    std::vector<Matrix*> parameters();
    std::vector<const Matrix*> parameters() const;

    /// Plain forward pass without a tape; input is [batch x width].
    Matrix evaluate(const Matrix& input) const;

    struct Binding {
        std::vector<Tape::Var> params;
    };
    /// Records every parameter on the tape as a differentiable leaf.
    Binding bind(Tape& tape) const;

    Tape::Var forward(Tape& tape, const Binding& binding, Tape::Var input) const;

    struct Dual {
        Tape::Var value;    // [batch x 1]
        Tape::Var tangent;  // [batch x 1] directional derivative along `tangent` input rows
    };
    /// Forward pass carrying a forward-mode tangent; both outputs are
    /// differentiable with respect to the bound parameters.
    Dual forward_dual(Tape& tape, const Binding& binding, Tape::Var input, Tape::Var tangent) const;

private:
    std::vector<Layer> layers_;
    Vector input_scale_;
};

/// Parameter gradients after tape.backward(), in Network::parameters() order.
std::vector<Matrix> gradients(const Tape& tape, const Network::Binding& binding);

/// d output / d input for every sample, [batch x width].
Matrix grad_input(const Network& net, const Matrix& input);

/// Versioned little-endian container: arch, seed, input scale, flat parameters.
void save_checkpoint(const Network& net, const ArchSpec& arch, std::uint64_t seed,
                     const std::filesystem::path& path);

struct Checkpoint {
    ArchSpec arch;
    std::uint64_t seed = 0;
    Network network;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace tnnswap::nn
