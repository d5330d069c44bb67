#include "tnnswap/bsde.hpp"

#include "fd_check.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace tnnswap;

namespace {

const std::vector<double> kTenor{1, 2, 3, 4, 5};

CheyetteParams params(double eta = 0.0065) {
    return CheyetteParams::uniform(3, -0.02, eta, DiscountCurve::reference());
}

// Independent evaluation of the interval loss from evaluate() and grad_input().
double loss_by_hand(const CheyetteParams& p, const nn::Network& net, const PathBatch& b, std::size_t k0,
                    std::span<const double> target) {
    const double dt = b.grid().dt();
    double loss = 0.0;
    for (std::size_t j = 0; j < b.paths(); ++j) {
        Matrix in(static_cast<Eigen::Index>(k0 + 1), 7);
        for (std::size_t k = 0; k <= k0; ++k) {
            for (int i = 0; i < 3; ++i) {
                in(static_cast<Eigen::Index>(k), i) = b.x(j, k)[static_cast<std::size_t>(i)];
                in(static_cast<Eigen::Index>(k), 3 + i) = b.y(j, k)[static_cast<std::size_t>(i)];
            }
            in(static_cast<Eigen::Index>(k), 6) = b.grid().point(k);
        }
        const Matrix v = net.evaluate(in);
        const Matrix g = nn::grad_input(net, in);
        for (std::size_t k = 0; k < k0; ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            double r = p.curve.forward_rate(b.grid().point(k));
            double mart = 0.0;
            for (int i = 0; i < 3; ++i) {
                r += b.x(j, k)[static_cast<std::size_t>(i)];
                mart += g(kk, i) * p.eta[static_cast<std::size_t>(i)] * b.dw(j, k)[static_cast<std::size_t>(i)];
            }
            const double tilde = v(kk, 0) * (1.0 + r * dt) + mart;
            loss += std::pow(v(kk + 1, 0) - tilde, 2);
        }
        loss += std::pow(v(static_cast<Eigen::Index>(k0), 0) - target[j], 2);
    }
    return loss;
}

TrainConfig quick(std::size_t epochs, std::size_t batch, std::uint64_t seed) {
    TrainConfig c;
    c.epochs = epochs;
    c.batch = batch;
    c.seed = seed;
    return c;
}

} // namespace

TEST(IntervalBatch, Layout) {
    const auto p = params();
    const auto b = simulate_paths(p, TimeGrid(5.0, 500), 3, RngSpec{1, 0}, 20);
    const std::vector<double> target{0.1, 0.2, 0.3};
    const auto ib = make_interval_batch(p, b, 10, 20, target);
    EXPECT_EQ(ib.input.rows(), 33);
    EXPECT_EQ(ib.rate_dt.rows(), 30);
    EXPECT_EQ(ib.prev_rows.size(), 30u);
    EXPECT_EQ(ib.start_rows, (std::vector<Eigen::Index>{0, 11, 22}));
    EXPECT_EQ(ib.terminal_rows, (std::vector<Eigen::Index>{10, 21, 32}));
    EXPECT_DOUBLE_EQ(ib.input(11 + 4, 6), 0.14);
    EXPECT_EQ(ib.input(11 + 4, 1), b.x(1, 14)[1]);
    EXPECT_EQ(ib.tangent(11 + 4, 2), 0.0065 * b.dw(1, 14)[2]);
    EXPECT_EQ(ib.tangent(10, 0), 0.0);  // terminal row carries no increment
    EXPECT_EQ(ib.tangent(3, 5), 0.0);   // Y columns never do
    EXPECT_DOUBLE_EQ(ib.target(2, 0), 0.3);
    EXPECT_THROW(make_interval_batch(p, b, 10, 21, target), std::invalid_argument);
    EXPECT_THROW(make_interval_batch(p, b, 10, 10, target), std::invalid_argument);
}

TEST(BsdeLoss, MatchesIndependentEvaluation) {
    const auto p = params();
    const SwaptionSpec s(kTenor, 0.0, ExerciseStyle::european);
    const auto b = simulate_paths(p, TimeGrid(5.0, 500), 4, RngSpec{2, 0}, 100);
    const auto target = european_terminal(p, s, b);
    auto net = nn::Network::init(nn::ArchSpec::parse("tnn:2x16"), 3);
    net.set_input_scale(input_scale_vector(p, TimeGrid(5.0, 500), InputScaling::factor));
    const auto ev = bsde_loss(net, make_interval_batch(p, b, 0, 100, target));
    const double hand = loss_by_hand(p, net, b, 100, target);
    EXPECT_NEAR(ev.loss, hand, 1e-12 * std::max(1.0, hand));
    EXPECT_NEAR(ev.loss, ev.recursion + ev.terminal, 1e-15);
    EXPECT_GE(ev.recursion, 0.0);
    EXPECT_GE(ev.terminal, 0.0);
}

TEST(BsdeLoss, ParameterGradientsMatchFiniteDifferences) {
    const auto p = params();
    const SwaptionSpec s(kTenor, 0.0, ExerciseStyle::european);
    const auto b = simulate_paths(p, TimeGrid(5.0, 500), 3, RngSpec{3, 0}, 100);
    const auto ib = make_interval_batch(p, b, 90, 100, european_terminal(p, s, b));
    auto net = nn::Network::init(nn::ArchSpec::parse("tnn:2x4"), 4);
    net.set_input_scale(input_scale_vector(p, TimeGrid(5.0, 500), InputScaling::factor));
    const auto ev = bsde_loss(net, ib);
    const auto ps = net.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        auto f = [&](const Matrix& m) {
            nn::Network n = net;
            *n.parameters()[i] = m;
            return bsde_loss(n, ib, false).loss;
        };
        fdcheck::expect_matches(f, *ps[i], ev.grads[i], 1e-5, 1e-6, "bsde");
    }
}

TEST(BsdeLoss, ZeroExactlyWhenRecursionAndTargetHold) {
    // Zero rates and volatility: a constant network satisfies the recursion.
    const auto p = CheyetteParams::uniform(3, -0.02, 0.0, DiscountCurve({{0.0, 1.0}, {10.0, 1.0}}));
    const auto b = simulate_paths(p, TimeGrid(5.0, 500), 2, RngSpec{5, 0}, 50);
    nn::Network net({nn::DenseLayer{Matrix::Zero(1, 7), Matrix::Constant(1, 1, 0.25), nn::Activation::identity}});
    const std::vector<double> hit{0.25, 0.25}, miss{0.25, 0.5};
    EXPECT_EQ(bsde_loss(net, make_interval_batch(p, b, 0, 50, hit)).loss, 0.0);
    EXPECT_NEAR(bsde_loss(net, make_interval_batch(p, b, 0, 50, miss)).loss, 0.0625, 1e-15);
}

TEST(Scaling, FactorVector) {
    const auto p = params();
    const auto s = input_scale_vector(p, TimeGrid(5.0, 500), InputScaling::factor);
    EXPECT_NEAR(s(0), 1.0 / (0.0065 * std::sqrt(5.0)), 1e-9);
    EXPECT_NEAR(s(4), 1.0 / (0.0065 * 0.0065 * 5.0), 1e-6);
    EXPECT_DOUBLE_EQ(s(6), 0.2);
    EXPECT_EQ(input_scale_vector(p, TimeGrid(5.0, 500), InputScaling::raw), nn::Vector::Ones(7));
    const auto flat = input_scale_vector(params(0.0), TimeGrid(5.0, 500), InputScaling::factor);
    EXPECT_EQ(flat(0), 1.0);
    EXPECT_EQ(flat(3), 1.0);
}

TEST(TrainConfigTest, Validation) {
    TrainConfig c;
    c.epochs = 10;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.epochs = 12;
    EXPECT_NO_THROW(c.validate());
    c.epochs_per_network = 6;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.epochs_per_network = 0;
    c.batch = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(TrainEuropean, TraceShapeAndDeterminism) {
    const auto p = params();
    const TimeGrid g(5.0, 500);
    const SwaptionSpec s(kTenor, 0.0, ExerciseStyle::european);
    const auto arch = nn::ArchSpec::parse("tnn:2x4");
    const auto a = train_european(p, g, s, arch, quick(8, 5, 11));
    const auto b = train_european(p, g, s, arch, quick(8, 5, 11));
    ASSERT_EQ(a.trace.records.size(), 8u);
    for (std::size_t e = 0; e < 8; ++e) {
        EXPECT_EQ(a.trace.records[e].epoch, e);
        EXPECT_EQ(a.trace.records[e].price, b.trace.records[e].price);
        EXPECT_EQ(a.trace.records[e].loss, b.trace.records[e].loss);
    }
    EXPECT_EQ(a.trace.records[1].lr, 1e-2);
    EXPECT_EQ(a.trace.records[7].lr, 1e-5);
    EXPECT_EQ(a.trace.price, b.trace.price);
    const auto c = train_european(p, g, s, arch, quick(8, 5, 12));
    EXPECT_NE(a.trace.price, c.trace.price);
    EXPECT_THROW(train_european(p, g, SwaptionSpec(kTenor, 0.0, ExerciseStyle::bermudan), arch, quick(8, 5, 1)),
                 std::invalid_argument);
    EXPECT_THROW(train_european(p, g, s, nn::ArchSpec::parse("tnn:2x4", 2, 5), quick(8, 5, 1)), std::invalid_argument);
}

TEST(TrainEuropean, DivergenceIsReported) {
    auto cfg = quick(4, 5, 1);
    cfg.rates = {1e300, 1e300, 1e300, 1e300};
    EXPECT_THROW(train_european(params(), TimeGrid(5.0, 500), SwaptionSpec(kTenor, 0.0, ExerciseStyle::european),
                                nn::ArchSpec::parse("dnn:2x4"), cfg),
                 std::runtime_error);
}

// Zero volatility: every path is the deterministic one, and the price is
// P(0,1) - P(0,5) = 0.10773.
TEST(TrainEuropean, ZeroVolatilityConverges) {
    const auto p = params(0.0);
    auto cfg = quick(2000, 1, 21);
    const auto res = train_european(p, TimeGrid(5.0, 500), SwaptionSpec(kTenor, 0.0, ExerciseStyle::european),
                                    nn::ArchSpec::parse("tnn:2x16"), cfg);
    EXPECT_NEAR(res.trace.price, 0.107730, 2e-4);
}

// T_0 on the first grid point: the price is one step of discounting away
// from the payoff at t = dt.
TEST(TrainEuropean, FirstGridPointExpiry) {
    const auto p = params();
    const SwaptionSpec s({0.01, 1, 2, 3, 4, 5}, 0.0, ExerciseStyle::european);
    const auto res = train_european(p, TimeGrid(5.0, 500), s, nn::ArchSpec::parse("tnn:2x16"), quick(200, 20, 3));
    const double undiscounted = 1.0 - p.curve.discount(5.0) / p.curve.discount(0.01);
    EXPECT_NEAR(res.trace.price, undiscounted, 2e-3);
}

TEST(TrainBermudan, OneNetworkPerExerciseDate) {
    const auto p = params();
    const SwaptionSpec s(kTenor, 0.0, ExerciseStyle::bermudan);
    auto cfg = quick(20, 4, 5);
    const auto res = train_bermudan(p, TimeGrid(5.0, 500), s, nn::ArchSpec::parse("tnn:2x4"), cfg);
    EXPECT_EQ(res.networks.size(), 5u);
    EXPECT_EQ(res.network_traces.size(), 5u);
    EXPECT_EQ(res.trace.records.size(), 20u);
    for (const auto& t : res.network_traces) EXPECT_EQ(t.records.size(), 4u);
    EXPECT_EQ(res.network_traces[4].records.front().epoch, 0u);  // trained first
    EXPECT_EQ(res.network_traces[0].records.back().epoch, 19u);
    cfg.epochs = 12;  // 12 / 5 is not a multiple of 4
    EXPECT_THROW(train_bermudan(p, TimeGrid(5.0, 500), s, nn::ArchSpec::parse("tnn:2x4"), cfg), std::invalid_argument);
    cfg.epochs_per_network = 4;
    EXPECT_NO_THROW(train_bermudan(p, TimeGrid(5.0, 500), s, nn::ArchSpec::parse("tnn:2x4"), cfg));
}

// Zero volatility: exercise at T_0 is optimal and the price matches the
// European one. Cold-started networks need far more epochs to get there.
TEST(TrainBermudan, ZeroVolatilityConvergesWithWarmStart) {
    const auto p = params(0.0);
    auto cfg = quick(5 * 800, 1, 8);
    cfg.warm_start = true;
    cfg.input_scaling = InputScaling::factor;
    const auto res = train_bermudan(p, TimeGrid(5.0, 500), SwaptionSpec(kTenor, 0.0, ExerciseStyle::bermudan),
                                    nn::ArchSpec::parse("tnn:2x16"), cfg);
    EXPECT_NEAR(res.trace.price, 0.107730, 5e-4);
}

TEST(RunSummaryTest, Bands) {
    const std::vector<double> one{0.11};
    const auto s1 = summarize_prices(one);
    EXPECT_FALSE(s1.half_width_95.has_value());
    EXPECT_EQ(s1.mean, 0.11);
    const std::vector<double> same(4, 0.2);
    EXPECT_EQ(summarize_prices(same).std_error, 0.0);
    const std::vector<double> ten{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const auto s10 = summarize_prices(ten);
    // Sample variance of 1..10 is 55/6.
    EXPECT_NEAR(s10.mean, 5.5, 1e-15);
    EXPECT_NEAR(s10.std_error, std::sqrt(55.0 / 6.0 / 10.0), 1e-14);
    EXPECT_NEAR(*s10.half_width_95, 1.96 * std::sqrt(55.0 / 6.0 / 10.0), 1e-14);
    std::vector<TrainTrace> traces(2);
    traces[0].price = 1.0;
    traces[1].price = 3.0;
    EXPECT_EQ(price_from_trace(traces).mean, 2.0);
}
