#include "tnnswap/curve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tnnswap {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

} // namespace

DiscountCurve::DiscountCurve(std::vector<CurvePillar> pillars)
    : pillars_(std::move(pillars)) {
    if (pillars_.size() < 2)
        throw std::invalid_argument("DiscountCurve: need at least two pillars");
    if (pillars_.front().maturity != 0.0 || pillars_.front().price != 1.0)
        throw std::invalid_argument("DiscountCurve: first pillar must be (0, 1.0)");
    log_price_.reserve(pillars_.size());
    for (std::size_t i = 0; i < pillars_.size(); ++i) {
        const auto& p = pillars_[i];
        if (!(p.price > 0.0) || !std::isfinite(p.price))
            throw std::invalid_argument("DiscountCurve: prices must be strictly positive");
        if (i > 0 && !(p.maturity > pillars_[i - 1].maturity))
            throw std::invalid_argument("DiscountCurve: maturities must be strictly increasing");
        log_price_.push_back(std::log(p.price));
    }
}

DiscountCurve DiscountCurve::reference() {
    return DiscountCurve({{0, 1.00000},  {1, 0.99005},  {2, 0.97528},  {3, 0.95596},
                          {4, 0.91376},  {5, 0.88232},  {6, 0.83500},  {7, 0.78240},
                          {8, 0.77064},  {13, 0.67661}, {18, 0.60911}, {23, 0.53693},
                          {28, 0.49611}, {33, 0.47940}, {38, 0.46721}});
}

DiscountCurve DiscountCurve::flat(double rate, double horizon) {
    if (!(horizon > 0.0)) throw std::invalid_argument("DiscountCurve::flat: horizon must be positive");
    std::vector<CurvePillar> pillars{{0.0, 1.0}};
    const int n = static_cast<int>(std::ceil(horizon));
    for (int i = 1; i <= n; ++i) {
        const double t = std::min(static_cast<double>(i), horizon);
        pillars.push_back({t, std::exp(-rate * t)});
    }
    return DiscountCurve(std::move(pillars));
}

DiscountCurve DiscountCurve::from_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open curve file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("curve file is empty: " + path.string());
    if (trim(line) != "maturity,price")
        throw std::runtime_error("curve file must start with header 'maturity,price': " + path.string());
    std::vector<CurvePillar> pillars;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected two columns");
        try {
            std::size_t used = 0;
            const std::string a = trim(line.substr(0, comma));
            const std::string b = trim(line.substr(comma + 1));
            const double maturity = std::stod(a, &used);
            if (used != a.size()) throw std::invalid_argument(a);
            const double price = std::stod(b, &used);
            if (used != b.size()) throw std::invalid_argument(b);
            pillars.push_back({maturity, price});
        } catch (const std::logic_error&) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": malformed number");
        }
    }
    return DiscountCurve(std::move(pillars));
}

std::size_t DiscountCurve::interval(double t) const {
    const auto it = std::upper_bound(pillars_.begin(), pillars_.end(), t,
                                     [](double v, const CurvePillar& p) { return v < p.maturity; });
    return static_cast<std::size_t>(std::distance(pillars_.begin(), it)) - 1;
}

double DiscountCurve::integrated_forward(double t) const {
    if (!(t >= 0.0) || t > last_maturity())
        throw std::out_of_range("DiscountCurve: t=" + std::to_string(t) + " outside curve range");
    const std::size_t a = interval(t);
    if (a + 1 == pillars_.size()) return -log_price_.back();
    const double ta = pillars_[a].maturity;
    const double tb = pillars_[a + 1].maturity;
    const double w = (t - ta) / (tb - ta);
    return -((1.0 - w) * log_price_[a] + w * log_price_[a + 1]);
}

double DiscountCurve::discount(double t) const {
    const std::size_t a = (t >= 0.0 && t <= last_maturity()) ? interval(t) : 0;
    if (t >= 0.0 && t <= last_maturity() && pillars_[a].maturity == t) return pillars_[a].price;
    return std::exp(-integrated_forward(t));
}

double DiscountCurve::forward_rate(double t) const {
    if (!(t >= 0.0) || t >= last_maturity())
        throw std::out_of_range("DiscountCurve: forward at t=" + std::to_string(t) + " outside curve range");
    const std::size_t a = interval(t);
    return (log_price_[a] - log_price_[a + 1]) / (pillars_[a + 1].maturity - pillars_[a].maturity);
}

void DiscountCurve::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write curve file " + path.string());
    out << "maturity,price\n";
    out.precision(17);
    for (const auto& p : pillars_) out << p.maturity << ',' << p.price << '\n';
}

} // namespace tnnswap
