#include "tnnswap/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

extern char** environ;

namespace tnnswap {

using nlohmann::json;

Method parse_method(const std::string& name) {
    if (name == "mc") return Method::mc;
    if (name == "ls") return Method::ls;
    if (name == "bsde-dense") return Method::bsde_dense;
    if (name == "bsde-tnn") return Method::bsde_tnn;
    throw ConfigError("method.name", "unknown method '" + name + "' (expected mc, ls, bsde-dense or bsde-tnn)");
}

std::string to_string(Method m) {
    switch (m) {
    case Method::mc: return "mc";
    case Method::ls: return "ls";
    case Method::bsde_dense: return "bsde-dense";
    case Method::bsde_tnn: return "bsde-tnn";
    }
    return "?";
}

namespace {

std::string style_name(ExerciseStyle s) { return s == ExerciseStyle::european ? "european" : "bermudan"; }
std::string scaling_name(InputScaling s) { return s == InputScaling::raw ? "raw" : "factor"; }

class Reader {
public:
    Reader(const json& obj, std::string path, std::set<std::string> allowed) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
        for (const auto& [key, _] : obj_.items())
            if (!allowed.contains(key)) throw ConfigError(field(key), "unknown key");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    const json* find(const std::string& key) const {
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void get(const std::string& key, double& out) const {
        if (const json* v = find(key)) {
            if (!v->is_number()) throw ConfigError(field(key), "expected a number");
            out = v->get<double>();
            if (!std::isfinite(out)) throw ConfigError(field(key), "must be finite");
        }
    }
    void get(const std::string& key, std::size_t& out) const {
        if (const json* v = find(key)) {
            if (!v->is_number_integer() || v->get<std::int64_t>() < 0)
                throw ConfigError(field(key), "expected a non-negative integer");
            out = v->get<std::size_t>();
        }
    }
    void get(const std::string& key, std::uint64_t& out, int) const {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
                throw ConfigError(field(key), "expected a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }
    void get(const std::string& key, bool& out) const {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
            out = v->get<bool>();
        }
    }
    void get(const std::string& key, std::string& out) const {
        if (const json* v = find(key)) {
            if (!v->is_string()) throw ConfigError(field(key), "expected a string");
            out = v->get<std::string>();
        }
    }
    template <typename T>
    void get_list(const std::string& key, std::vector<T>& out) const {
        if (const json* v = find(key)) {
            if (!v->is_array()) throw ConfigError(field(key), "expected an array");
            out.clear();
            for (std::size_t i = 0; i < v->size(); ++i) {
                const json& e = (*v)[i];
                const std::string f = field(key) + "[" + std::to_string(i) + "]";
                if constexpr (std::is_same_v<T, double>) {
                    if (!e.is_number()) throw ConfigError(f, "expected a number");
                } else {
                    if (!e.is_number_integer() || e.get<std::int64_t>() < 0)
                        throw ConfigError(f, "expected a non-negative integer");
                }
                out.push_back(e.get<T>());
            }
        }
    }
    const json* section(const std::string& key) const { return find(key); }

private:
    const json& obj_;
    std::string path_;
};

bool is_perfect_square(std::size_t w) {
    const auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(w))));
    return r * r == w;
}

} // namespace

ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig cfg;
    const Reader root(doc, "", {"name", "model", "grid", "instrument", "method", "arch", "training"});
    root.get("name", cfg.name);

    if (const json* s = root.section("model")) {
        const Reader r(*s, "model", {"factors", "kappa", "eta", "curve"});
        r.get("factors", cfg.model.factors);
        r.get("kappa", cfg.model.kappa);
        r.get("eta", cfg.model.eta);
        r.get("curve", cfg.model.curve);
    }
    if (const json* s = root.section("grid")) {
        const Reader r(*s, "grid", {"t_end", "steps"});
        r.get("t_end", cfg.grid.t_end);
        r.get("steps", cfg.grid.steps);
    }
    if (const json* s = root.section("instrument")) {
        const Reader r(*s, "instrument", {"tenor", "fixed_rate", "style"});
        r.get_list("tenor", cfg.instrument.tenor);
        r.get("fixed_rate", cfg.instrument.fixed_rate);
        std::string style = style_name(cfg.instrument.style);
        r.get("style", style);
        if (style == "european") cfg.instrument.style = ExerciseStyle::european;
        else if (style == "bermudan") cfg.instrument.style = ExerciseStyle::bermudan;
        else throw ConfigError("instrument.style", "expected european or bermudan, got '" + style + "'");
    }
    if (const json* s = root.section("method")) {
        const Reader r(*s, "method", {"name", "paths", "degree", "itm_only"});
        std::string name = to_string(cfg.method.name);
        r.get("name", name);
        cfg.method.name = parse_method(name);
        r.get("paths", cfg.method.paths);
        r.get("degree", cfg.method.degree);
        r.get("itm_only", cfg.method.itm_only);
    }
    if (const json* s = root.section("arch")) {
        const Reader r(*s, "arch", {"widths", "chi"});
        r.get_list("widths", cfg.arch.widths);
        r.get("chi", cfg.arch.chi);
    }
    if (const json* s = root.section("training")) {
        const Reader r(*s, "training",
                       {"epochs", "batch", "seed", "runs", "steps_per_epoch", "fresh_paths", "input_scaling",
                        "epochs_per_network", "warm_start", "rates"});
        r.get("epochs", cfg.training.epochs);
        r.get("batch", cfg.training.batch);
        r.get("seed", cfg.training.seed, 0);
        r.get("runs", cfg.training.runs);
        r.get("steps_per_epoch", cfg.training.steps_per_epoch);
        r.get("fresh_paths", cfg.training.fresh_paths);
        std::string scaling = scaling_name(cfg.training.input_scaling);
        r.get("input_scaling", scaling);
        if (scaling == "raw") cfg.training.input_scaling = InputScaling::raw;
        else if (scaling == "factor") cfg.training.input_scaling = InputScaling::factor;
        else throw ConfigError("training.input_scaling", "expected raw or factor, got '" + scaling + "'");
        r.get("epochs_per_network", cfg.training.epochs_per_network);
        r.get("warm_start", cfg.training.warm_start);
        std::vector<double> rates(cfg.training.rates.begin(), cfg.training.rates.end());
        r.get_list("rates", rates);
        if (rates.size() != 4) throw ConfigError("training.rates", "expected exactly four learning rates");
        std::copy(rates.begin(), rates.end(), cfg.training.rates.begin());
    }
    return cfg;
}

void ExperimentConfig::validate() const {
    if (model.factors == 0) throw ConfigError("model.factors", "must be at least 1");
    if (model.kappa == 0.0) throw ConfigError("model.kappa", "must be nonzero");
    if (model.eta < 0.0) throw ConfigError("model.eta", "must be non-negative");
    if (model.curve.empty()) throw ConfigError("model.curve", "must name a curve");
    if (!(grid.t_end > 0.0)) throw ConfigError("grid.t_end", "must be positive");
    if (grid.steps == 0) throw ConfigError("grid.steps", "must be positive");

    const auto& tenor = instrument.tenor;
    if (tenor.size() < 2) throw ConfigError("instrument.tenor", "needs at least two dates");
    if (!(tenor.front() > 0.0)) throw ConfigError("instrument.tenor", "T_0 must be positive");
    const TimeGrid g(grid.t_end, grid.steps);
    for (std::size_t i = 0; i < tenor.size(); ++i) {
        const std::string f = "instrument.tenor[" + std::to_string(i) + "]";
        if (i > 0 && !(tenor[i] > tenor[i - 1])) throw ConfigError(f, "tenor must be strictly increasing");
        if (tenor[i] > grid.t_end) throw ConfigError(f, "lies beyond grid.t_end");
        try {
            (void)g.index_of(tenor[i]);
        } catch (const std::invalid_argument&) {
            throw ConfigError(f, "is not a grid point (dt = " + std::to_string(g.dt()) + ")");
        }
    }
    if (instrument.fixed_rate < 0.0) throw ConfigError("instrument.fixed_rate", "must be non-negative");

    if (method.name == Method::mc && instrument.style != ExerciseStyle::european)
        throw ConfigError("method.name", "mc prices European swaptions only");
    if (method.name == Method::ls && instrument.style != ExerciseStyle::bermudan)
        throw ConfigError("method.name", "ls prices Bermudan swaptions only");
    if (method.paths == 0) throw ConfigError("method.paths", "must be positive");
    if (method.degree == 0) throw ConfigError("method.degree", "must be at least 1");

    if (arch.widths.empty()) throw ConfigError("arch.widths", "needs at least one hidden layer");
    for (std::size_t i = 0; i < arch.widths.size(); ++i)
        if (arch.widths[i] == 0) throw ConfigError("arch.widths[" + std::to_string(i) + "]", "must be positive");
    if (method.name == Method::bsde_tnn) {
        for (std::size_t i = 0; i < arch.widths.size(); ++i) {
            const std::string f = "arch.widths[" + std::to_string(i) + "]";
            if (!is_perfect_square(arch.widths[i])) throw ConfigError(f, "TNN widths must be perfect squares");
            if (arch.widths[i] != arch.widths[0]) throw ConfigError(f, "TNN layers must share one width");
        }
    }
    if (arch.chi == 0) throw ConfigError("arch.chi", "must be positive");

    if (training.epochs == 0 || training.epochs % 4 != 0)
        throw ConfigError("training.epochs", "must be a positive multiple of 4");
    if (training.batch == 0) throw ConfigError("training.batch", "must be positive");
    if (training.runs == 0) throw ConfigError("training.runs", "must be positive");
    if (training.steps_per_epoch == 0) throw ConfigError("training.steps_per_epoch", "must be positive");
    if (training.epochs_per_network % 4 != 0)
        throw ConfigError("training.epochs_per_network", "must be a multiple of 4");
    const bool bsde = method.name == Method::bsde_dense || method.name == Method::bsde_tnn;
    if (bsde && instrument.style == ExerciseStyle::bermudan && training.epochs_per_network == 0 &&
        (training.epochs % tenor.size() != 0 || (training.epochs / tenor.size()) % 4 != 0))
        throw ConfigError("training.epochs", "split evenly over the exercise dates must give a multiple of 4 per network");
    for (double r : training.rates)
        if (!(r > 0.0)) throw ConfigError("training.rates", "learning rates must be positive");
}

CheyetteParams ExperimentConfig::make_params() const {
    DiscountCurve curve = [&] {
        if (model.curve == "reference") return DiscountCurve::reference();
        std::filesystem::path p = model.curve;
        if (p.is_relative()) p = base_dir / p;
        try {
            return DiscountCurve::from_csv(p);
        } catch (const std::exception& e) {
            throw ConfigError("model.curve", e.what());
        }
    }();
    if (curve.last_maturity() < instrument.tenor.back())
        throw ConfigError("model.curve", "does not reach T_n");
    return CheyetteParams::uniform(model.factors, model.kappa, model.eta, std::move(curve));
}

TimeGrid ExperimentConfig::make_grid() const { return TimeGrid(grid.t_end, grid.steps); }

SwaptionSpec ExperimentConfig::make_spec() const {
    return SwaptionSpec(instrument.tenor, instrument.fixed_rate, instrument.style);
}

nn::ArchSpec ExperimentConfig::make_arch() const {
    nn::ArchSpec a;
    a.family = method.name == Method::bsde_tnn ? nn::ArchFamily::tnn : nn::ArchFamily::dnn;
    a.hidden = arch.widths;
    a.chi = arch.chi;
    a.input_width = 2 * model.factors + 1;
    a.validate();
    return a;
}

TrainConfig ExperimentConfig::make_train_config(std::uint64_t seed) const {
    TrainConfig t;
    t.epochs = training.epochs;
    t.batch = training.batch;
    t.steps_per_epoch = training.steps_per_epoch;
    t.rates = training.rates;
    t.seed = seed;
    t.fresh_paths = training.fresh_paths;
    t.input_scaling = training.input_scaling;
    t.epochs_per_network = training.epochs_per_network;
    t.warm_start = training.warm_start;
    return t;
}

LsConfig ExperimentConfig::make_ls_config() const { return LsConfig{method.degree, method.itm_only, method.paths}; }

json ExperimentConfig::to_json() const {
    return json{
        {"name", name},
        {"model", {{"factors", model.factors}, {"kappa", model.kappa}, {"eta", model.eta}, {"curve", model.curve}}},
        {"grid", {{"t_end", grid.t_end}, {"steps", grid.steps}}},
        {"instrument",
         {{"tenor", instrument.tenor}, {"fixed_rate", instrument.fixed_rate}, {"style", style_name(instrument.style)}}},
        {"method",
         {{"name", to_string(method.name)},
          {"paths", method.paths},
          {"degree", method.degree},
          {"itm_only", method.itm_only}}},
        {"arch", {{"widths", arch.widths}, {"chi", arch.chi}}},
        {"training",
         {{"epochs", training.epochs},
          {"batch", training.batch},
          {"seed", training.seed},
          {"runs", training.runs},
          {"steps_per_epoch", training.steps_per_epoch},
          {"fresh_paths", training.fresh_paths},
          {"input_scaling", scaling_name(training.input_scaling)},
          {"epochs_per_network", training.epochs_per_network},
          {"warm_start", training.warm_start},
          {"rates", training.rates}}},
    };
}

void apply_env_overrides(json& doc, const std::vector<std::string>& env) {
    constexpr std::string_view prefix = "TNNSWAP_";
    for (const std::string& entry : env) {
        if (!entry.starts_with(prefix)) continue;
        const auto eq = entry.find('=');
        if (eq == std::string::npos) continue;
        std::string key = entry.substr(prefix.size(), eq - prefix.size());
        const std::string raw = entry.substr(eq + 1);
        for (char& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (key == "config" || key == "out_dir") continue;  // CLI-level variables, not config fields
        json value = json::parse(raw, nullptr, false);
        if (value.is_discarded()) value = raw;
        const auto sep = key.find("__");
        if (sep == std::string::npos) {
            doc[key] = value;
        } else {
            json& section = doc[key.substr(0, sep)];
            if (!section.is_null() && !section.is_object())
                throw ConfigError(key.substr(0, sep), "environment override targets a non-object");
            section[key.substr(sep + 2)] = value;
        }
    }
}

std::vector<std::string> process_environment() {
    std::vector<std::string> out;
    for (char** e = environ; e && *e; ++e) out.emplace_back(*e);
    return out;
}

std::filesystem::path resolve_config_path(const std::string& name) {
    namespace fs = std::filesystem;
    if (fs::is_regular_file(name)) return name;
    const std::string file = name.ends_with(".json") ? name : name + ".json";
    for (const fs::path& dir : {fs::path("experiments"), fs::path(TNNSWAP_SOURCE_DIR) / "experiments"})
        if (fs::is_regular_file(dir / file)) return dir / file;
    throw ConfigError("--config", "no config file or bundled experiment named '" + name + "'");
}

ExperimentConfig load_config(const std::string& name_or_path) {
    const auto path = resolve_config_path(name_or_path);
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot read " + path.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("--config", path.string() + " is not valid JSON");
    apply_env_overrides(doc, process_environment());
    ExperimentConfig cfg = parse_config(doc);
    cfg.base_dir = path.parent_path();
    cfg.validate();
    return cfg;
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string text = cfg.to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace tnnswap
