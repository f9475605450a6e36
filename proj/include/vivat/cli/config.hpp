#pragma once

#include <map>
#include <string>
#include <vector>

#include "vivat/data/dataset.hpp"
#include "vivat/diagnostics/detectors.hpp"
#include "vivat/train/trainer.hpp"

namespace vivat {

// Flat key-value view of a TOML-style config file: `[section]` headers,
// `key = value` lines, `#` comments, arrays in brackets. Keys are addressed
// by dotted path, e.g. "train.max_steps", which is also the --set syntax.
class KvConfig {
public:
    KvConfig() = default;
    static KvConfig parse_file(const std::string& path);
    static KvConfig parse_text(const std::string& text, const std::string& origin = "<text>");

    // --set key=value
    void apply_override(const std::string& assignment);
    void set(const std::string& key, const std::string& value);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const;

    const std::map<std::string, std::string>& entries() const { return values_; }
    std::string dump_toml() const;

private:
    const std::string& raw(const std::string& key) const;
    std::map<std::string, std::string> values_;
};

// Everything one run needs, merged and validated. A serialized copy lands in
// the run directory; re-loading that copy reproduces the run.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    DatasetSource data;
    PreprocessSpec preprocess;
    DetectorThresholds detect;
    std::string origin;  // config file path or preset name
    std::vector<std::string> overrides;

    void validate() const;
    std::string dump_toml() const;
};

// preset names: "baseline" (zero padding, group-norm decoder, lambda_kl 1e-3,
// lambda_adv 0.1) and "vivat" (reflect padding, SCN, Table-style weights)
KvConfig preset_config(const std::string& name);

RunConfig run_config_from(const KvConfig& kv);

}  // namespace vivat
