#pragma once

#include "tnnswap/bsde.hpp"
#include "tnnswap/cheyette.hpp"
#include "tnnswap/nn/network.hpp"
#include "tnnswap/oracles.hpp"
#include "tnnswap/simulate.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace tnnswap {

/// Invalid configuration; the message starts with the offending field path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

enum class Method { mc, ls, bsde_dense, bsde_tnn };

Method parse_method(const std::string& name);
std::string to_string(Method m);

struct ExperimentConfig {
    std::string name = "experiment";

    struct Model {
        std::size_t factors = 3;
        double kappa = -0.02;
        double eta = 0.0065;
        std::string curve = "reference";  // "reference" or a CSV path, relative to the config file
    } model;

    struct Grid {
        double t_end = 5.0;
        std::size_t steps = 500;
    } grid;

    struct Instrument {
        std::vector<double> tenor{1.0, 2.0, 3.0, 4.0, 5.0};
        double fixed_rate = 0.0;
        ExerciseStyle style = ExerciseStyle::european;
    } instrument;

    struct MethodSection {
        Method name = Method::mc;
        std::size_t paths = 100000;  // mc and ls
        std::size_t degree = 1;      // ls
        bool itm_only = true;        // ls
    } method;

    struct Arch {
        std::vector<std::size_t> widths{64, 64};
        std::size_t chi = 2;
    } arch;

    struct Training {
        std::size_t epochs = 1000;
        std::size_t batch = 100;
        std::uint64_t seed = 1;
        std::size_t runs = 1;
        std::size_t steps_per_epoch = 1;
        bool fresh_paths = true;
        InputScaling input_scaling = InputScaling::raw;
        std::size_t epochs_per_network = 0;
        bool warm_start = false;
        std::array<double, 4> rates{1e-2, 1e-3, 1e-4, 1e-5};
    } training;

    /// Directory that relative paths in the config are resolved against.
    std::filesystem::path base_dir = ".";

    /// Cross-field checks; throws ConfigError.
    void validate() const;

    CheyetteParams make_params() const;
    TimeGrid make_grid() const;
    SwaptionSpec make_spec() const;
    nn::ArchSpec make_arch() const;
    TrainConfig make_train_config(std::uint64_t seed) const;
    LsConfig make_ls_config() const;

    nlohmann::json to_json() const;
};

/// Strict parse: unknown keys and wrong types are ConfigErrors. Missing keys keep defaults.
ExperimentConfig parse_config(const nlohmann::json& doc);

/// Applies TNNSWAP_<SECTION>__<KEY>=value overrides from `env` (entries "NAME=value").
/// Values are read as JSON when they parse, else as strings.
void apply_env_overrides(nlohmann::json& doc, const std::vector<std::string>& env);

/// The process environment in the form apply_env_overrides expects.
std::vector<std::string> process_environment();

/// A file path, or a bundled name looked up as experiments/<name>.json.
std::filesystem::path resolve_config_path(const std::string& name_or_path);

/// Reads, applies environment overrides, parses and validates.
ExperimentConfig load_config(const std::string& name_or_path);

/// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

} // namespace tnnswap
