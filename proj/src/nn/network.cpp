#include "tnnswap/nn/network.hpp"

#include "tnnswap/rng.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tnnswap::nn {

namespace {

std::size_t perfect_square_root(std::size_t n) {
    const auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
    return r * r == n ? r : 0;
}

std::size_t parse_uint(std::string_view s, std::string_view whole) {
    if (s.empty()) throw std::invalid_argument("ArchSpec: malformed '" + std::string(whole) + "'");
    std::size_t v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') throw std::invalid_argument("ArchSpec: malformed '" + std::string(whole) + "'");
        v = v * 10 + static_cast<std::size_t>(c - '0');
    }
    return v;
}

std::size_t layer_in(const Layer& l) {
    return std::visit([](const auto& x) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, DenseLayer>) return x.in();
        else return x.width();
    }, l);
}

std::size_t layer_out(const Layer& l) {
    return std::visit([](const auto& x) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, DenseLayer>) return x.out();
        else return x.width();
    }, l);
}

Matrix activate(Matrix z, Activation a) {
    if (a == Activation::tanh) z = z.array().tanh().matrix();
    return z;
}

} // namespace

ArchSpec ArchSpec::parse(std::string_view text, std::size_t chi, std::size_t input_width) {
    ArchSpec spec;
    spec.chi = chi;
    spec.input_width = input_width;
    const auto colon = text.find(':');
    if (colon == std::string_view::npos)
        throw std::invalid_argument("ArchSpec: expected 'dnn:...' or 'tnn:...', got '" + std::string(text) + "'");
    const auto family = text.substr(0, colon);
    if (family == "dnn") spec.family = ArchFamily::dnn;
    else if (family == "tnn") spec.family = ArchFamily::tnn;
    else throw std::invalid_argument("ArchSpec: unknown family '" + std::string(family) + "'");
    const auto body = text.substr(colon + 1);
    if (const auto x = body.find('x'); x != std::string_view::npos) {
        const std::size_t layers = parse_uint(body.substr(0, x), text);
        const std::size_t width = parse_uint(body.substr(x + 1), text);
        spec.hidden.assign(layers, width);
    } else {
        std::size_t start = 0;
        while (start <= body.size()) {
            const auto comma = body.find(',', start);
            const auto piece = body.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
            spec.hidden.push_back(parse_uint(piece, text));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
    }
    spec.validate();
    return spec;
}

std::string ArchSpec::to_string() const {
    std::string s = family == ArchFamily::dnn ? "dnn:" : "tnn:";
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(hidden[i]);
    }
    return s;
}

void ArchSpec::validate() const {
    if (hidden.empty()) throw std::invalid_argument("ArchSpec: need at least one hidden layer");
    if (input_width == 0) throw std::invalid_argument("ArchSpec: input width must be positive");
    for (std::size_t w : hidden)
        if (w == 0) throw std::invalid_argument("ArchSpec: hidden widths must be positive");
    if (family == ArchFamily::tnn) {
        if (chi == 0) throw std::invalid_argument("ArchSpec: bond dimension must be positive");
        for (std::size_t i = 1; i < hidden.size(); ++i) {
            if (hidden[i] != hidden[0])
                throw std::invalid_argument("ArchSpec: TNN layers must all have the same width");
        }
        if (hidden.size() > 1 && perfect_square_root(hidden[0]) == 0)
            throw std::invalid_argument("ArchSpec: TNN width " + std::to_string(hidden[0]) +
                                        " is not a perfect square");
    }
}

std::size_t param_count(const ArchSpec& arch) {
    arch.validate();
    std::size_t n = arch.input_width * arch.hidden[0] + arch.hidden[0];
    for (std::size_t i = 1; i < arch.hidden.size(); ++i) {
        const std::size_t w = arch.hidden[i];
        n += arch.family == ArchFamily::dnn ? arch.hidden[i - 1] * w + w : 2 * arch.chi * w + w;
    }
    return n + arch.hidden.back() + 1;
}

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw std::invalid_argument("Network: no layers");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (i > 0 && layer_in(layers_[i]) != layer_out(layers_[i - 1]))
            throw std::invalid_argument("Network: width mismatch between layers " + std::to_string(i - 1) +
                                        " and " + std::to_string(i));
        if (const auto* m = std::get_if<MpoLayer>(&layers_[i])) {
            const auto d = static_cast<Eigen::Index>(m->phys);
            const auto c = static_cast<Eigen::Index>(m->chi);
            if (m->w1.rows() != d || m->w1.cols() != d * c || m->w2.rows() != d || m->w2.cols() != d * c ||
                m->bias.rows() != d * d || m->bias.cols() != 1)
                throw std::invalid_argument("Network: MPO layer tensors have inconsistent shapes");
        } else {
            const auto& l = std::get<DenseLayer>(layers_[i]);
            if (l.bias.rows() != l.weight.rows() || l.bias.cols() != 1)
                throw std::invalid_argument("Network: dense bias shape mismatch");
        }
    }
    input_scale_ = Vector::Ones(static_cast<Eigen::Index>(input_width()));
}

Network Network::init(const ArchSpec& arch, std::uint64_t seed) {
    arch.validate();
    PhiloxStream rng(seed, 0x1A1Fu);
    std::vector<Layer> layers;
    auto dense = [&](std::size_t in, std::size_t out, Activation act) {
        DenseLayer l;
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        l.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = bound * (2.0 * rng.uniform() - 1.0);
        l.bias = Matrix::Zero(static_cast<Eigen::Index>(out), 1);
        l.activation = act;
        layers.emplace_back(std::move(l));
    };
    dense(arch.input_width, arch.hidden[0], Activation::tanh);
    for (std::size_t i = 1; i < arch.hidden.size(); ++i) {
        if (arch.family == ArchFamily::dnn) {
            dense(arch.hidden[i - 1], arch.hidden[i], Activation::tanh);
            continue;
        }
        MpoLayer m;
        m.phys = perfect_square_root(arch.hidden[i]);
        m.chi = arch.chi;
        const auto d = static_cast<Eigen::Index>(m.phys);
        const auto c = static_cast<Eigen::Index>(m.chi);
        const double glorot_var = 2.0 / static_cast<double>(2 * arch.hidden[i]);
        const double core_std = std::pow(glorot_var / static_cast<double>(m.chi), 0.25);
        m.w1.resize(d, d * c);
        m.w2.resize(d, d * c);
        for (Matrix* core : {&m.w1, &m.w2})
            for (Eigen::Index r = 0; r < core->rows(); ++r)
                for (Eigen::Index col = 0; col < core->cols(); ++col) (*core)(r, col) = core_std * rng.normal();
        m.bias = Matrix::Zero(d * d, 1);
        m.activation = Activation::tanh;
        layers.emplace_back(std::move(m));
    }
    dense(arch.hidden.back(), 1, Activation::identity);
    return Network(std::move(layers));
}

std::size_t Network::input_width() const { return layer_in(layers_.front()); }

std::size_t Network::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) std::visit([&](const auto& x) { n += x.param_count(); }, l);
    return n;
}

void Network::set_input_scale(Vector scale) {
    if (scale.size() != static_cast<Eigen::Index>(input_width()))
        throw std::invalid_argument("Network: input scale width mismatch");
    input_scale_ = std::move(scale);
}

std::vector<Matrix*> Network::parameters() {
    std::vector<Matrix*> out;
    for (auto& l : layers_) {
        if (auto* d = std::get_if<DenseLayer>(&l)) {
            out.push_back(&d->weight);
            out.push_back(&d->bias);
        } else {
            auto& m = std::get<MpoLayer>(l);
            out.push_back(&m.w1);
            out.push_back(&m.w2);
            out.push_back(&m.bias);
        }
    }
    return out;
}

std::vector<const Matrix*> Network::parameters() const {
    auto mut = const_cast<Network*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

Matrix Network::evaluate(const Matrix& input) const {
    if (input.cols() != static_cast<Eigen::Index>(input_width()))
        throw std::invalid_argument("Network::evaluate: input width " + std::to_string(input.cols()) +
                                    " does not match " + std::to_string(input_width()));
    Matrix a = input * input_scale_.asDiagonal();
    for (const auto& l : layers_) {
        if (const auto* d = std::get_if<DenseLayer>(&l)) {
            Matrix z = a * d->weight.transpose();
            z.rowwise() += d->bias.col(0).transpose();
            a = activate(std::move(z), d->activation);
        } else {
            const auto& m = std::get<MpoLayer>(l);
            Matrix z = a * m.weight().transpose();
            z.rowwise() += m.bias.col(0).transpose();
            a = activate(std::move(z), m.activation);
        }
    }
    return a;
}

Network::Binding Network::bind(Tape& tape) const {
    Binding b;
    for (const Matrix* p : parameters()) b.params.push_back(tape.variable(*p));
    return b;
}

namespace {

struct LayerVars {
    Tape::Var weight;
    Tape::Var bias;
    Activation activation;
};

std::vector<LayerVars> layer_vars(Tape& tape, const std::vector<Layer>& layers, const Network::Binding& b) {
    std::vector<LayerVars> out;
    std::size_t p = 0;
    for (const auto& l : layers) {
        if (const auto* d = std::get_if<DenseLayer>(&l)) {
            out.push_back({b.params.at(p), b.params.at(p + 1), d->activation});
            p += 2;
        } else {
            const auto& m = std::get<MpoLayer>(l);
            const auto w = tape.mpo_contract(b.params.at(p), b.params.at(p + 1), m.phys, m.chi);
            out.push_back({w, b.params.at(p + 2), m.activation});
            p += 3;
        }
    }
    if (p != b.params.size()) throw std::invalid_argument("Network: binding does not match the network");
    return out;
}

} // namespace

Tape::Var Network::forward(Tape& tape, const Binding& binding, Tape::Var input) const {
    if (tape.value(input).cols() != static_cast<Eigen::Index>(input_width()))
        throw std::invalid_argument("Network::forward: input width mismatch");
    auto a = tape.scale_cols(input, input_scale_);
    for (const auto& lv : layer_vars(tape, layers_, binding)) {
        a = tape.add_bias(tape.matmul_t(a, lv.weight), lv.bias);
        if (lv.activation == Activation::tanh) a = tape.tanh(a);
    }
    return a;
}

Network::Dual Network::forward_dual(Tape& tape, const Binding& binding, Tape::Var input, Tape::Var tangent) const {
    if (tape.value(input).cols() != static_cast<Eigen::Index>(input_width()))
        throw std::invalid_argument("Network::forward_dual: input width mismatch");
    if (tape.value(tangent).rows() != tape.value(input).rows() || tape.value(tangent).cols() != tape.value(input).cols())
        throw std::invalid_argument("Network::forward_dual: tangent shape must match input");
    auto a = tape.scale_cols(input, input_scale_);
    auto da = tape.scale_cols(tangent, input_scale_);
    for (const auto& lv : layer_vars(tape, layers_, binding)) {
        const auto z = tape.add_bias(tape.matmul_t(a, lv.weight), lv.bias);
        const auto dz = tape.matmul_t(da, lv.weight);
        if (lv.activation == Activation::tanh) {
            a = tape.tanh(z);
            da = tape.mul(tape.one_minus_square(a), dz);
        } else {
            a = z;
            da = dz;
        }
    }
    return {a, da};
}

std::vector<Matrix> gradients(const Tape& tape, const Network::Binding& binding) {
    std::vector<Matrix> out;
    out.reserve(binding.params.size());
    for (auto v : binding.params) out.push_back(tape.grad(v));
    return out;
}

Matrix grad_input(const Network& net, const Matrix& input) {
    Tape tape;
    const auto binding = net.bind(tape);
    const auto x = tape.variable(input);
    const auto y = net.forward(tape, binding, x);
    // Samples are independent, so the gradient of the batch sum is per-sample.
    tape.backward(tape.sum(y));
    return tape.grad(x);
}

// Checkpoint layout (all little-endian):
//   "TNNSWPCK" | u32 version | u32 len | arch string | u64 chi | u64 input width |
//   u64 seed | u64 n_scale | f64[n_scale] | u64 n_params | f64[n_params]
namespace {

constexpr char kMagic[8] = {'T', 'N', 'N', 'S', 'W', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw std::runtime_error("checkpoint: truncated file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T v;
    std::memcpy(&v, bytes, sizeof(T));
    return v;
}

void put_matrix(std::ostream& out, const Matrix& m) {
    // Row-major flattening, so MPO cores read as [phys x chi x phys].
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
}

void get_matrix(std::istream& in, Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get<double>(in);
}

} // namespace

void save_checkpoint(const Network& net, const ArchSpec& arch, std::uint64_t seed,
                     const std::filesystem::path& path) {
    if (param_count(arch) != net.param_count())
        throw std::invalid_argument("save_checkpoint: network does not match architecture");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    const std::string a = arch.to_string();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.size()));
    out.write(a.data(), static_cast<std::streamsize>(a.size()));
    put<std::uint64_t>(out, arch.chi);
    put<std::uint64_t>(out, arch.input_width);
    put<std::uint64_t>(out, seed);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(net.input_scale().size()));
    for (Eigen::Index i = 0; i < net.input_scale().size(); ++i) put<double>(out, net.input_scale()(i));
    put<std::uint64_t>(out, net.param_count());
    for (const Matrix* p : net.parameters()) put_matrix(out, *p);
    if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path.string());
    if (const auto v = get<std::uint32_t>(in); v != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(v));
    const auto len = get<std::uint32_t>(in);
    std::string a(len, '\0');
    if (!in.read(a.data(), len)) throw std::runtime_error("checkpoint: truncated file");
    const auto chi = get<std::uint64_t>(in);
    const auto width = get<std::uint64_t>(in);
    const auto seed = get<std::uint64_t>(in);
    ArchSpec arch = ArchSpec::parse(a, chi, width);
    Network net = Network::init(arch, 0);
    const auto n_scale = get<std::uint64_t>(in);
    if (n_scale != width) throw std::runtime_error("checkpoint: input scale width mismatch");
    Vector scale(static_cast<Eigen::Index>(n_scale));
    for (Eigen::Index i = 0; i < scale.size(); ++i) scale(i) = get<double>(in);
    net.set_input_scale(scale);
    if (get<std::uint64_t>(in) != net.param_count()) throw std::runtime_error("checkpoint: parameter count mismatch");
    for (Matrix* p : net.parameters()) get_matrix(in, *p);
    return Checkpoint{arch, seed, std::move(net)};
}

} // namespace tnnswap::nn
