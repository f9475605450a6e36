#include "vivat/cli/config.hpp"

#include <fstream>
#include <sstream>

namespace vivat {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string strip_quotes(const std::string& s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\'')))
        return s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> split_list(const std::string& s) {
    std::string body = trim(s);
    if (body.size() >= 2 && body.front() == '[' && body.back() == ']')
        body = body.substr(1, body.size() - 2);
    std::vector<std::string> out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(strip_quotes(item));
    }
    return out;
}

}  // namespace

KvConfig KvConfig::parse_text(const std::string& text, const std::string& origin) {
    KvConfig cfg;
    std::stringstream ss(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        cfg.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_text(ss.str(), path);
}

void KvConfig::apply_override(const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--set expects key=value, got '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void KvConfig::set(const std::string& key, const std::string& value) {
    values_[key] = value;
}

bool KvConfig::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& KvConfig::raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("config: missing field '" + key + "'");
    return it->second;
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    return strip_quotes(raw(key));
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    try {
        return std::stod(raw(key));
    } catch (...) {
        throw ConfigError("config: field '" + key + "' is not a number: " + raw(key));
    }
}

int64_t KvConfig::get_int(const std::string& key, int64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = raw(key);
    if (s == "inf" || s == "never") return std::numeric_limits<int64_t>::max();
    try {
        return std::stoll(s);
    } catch (...) {
        throw ConfigError("config: field '" + key + "' is not an integer: " + s);
    }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = raw(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("config: field '" + key + "' is not a boolean: " + s);
}

std::vector<int> KvConfig::get_int_list(const std::string& key,
                                        const std::vector<int>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<int> out;
    for (const auto& item : split_list(raw(key))) {
        try {
            out.push_back(std::stoi(item));
        } catch (...) {
            throw ConfigError("config: field '" + key + "' has a non-integer entry: " + item);
        }
    }
    return out;
}

std::vector<double> KvConfig::get_double_list(const std::string& key,
                                              const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(raw(key))) {
        try {
            out.push_back(std::stod(item));
        } catch (...) {
            throw ConfigError("config: field '" + key + "' has a non-number entry: " + item);
        }
    }
    return out;
}

std::string KvConfig::dump_toml() const {
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
    for (const auto& [key, value] : values_) {
        auto dot = key.rfind('.');
        std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
        std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
        sections[section].emplace_back(name, value);
    }
    std::ostringstream os;
    for (const auto& [section, entries] : sections) {
        if (!section.empty()) os << "[" << section << "]\n";
        for (const auto& [name, value] : entries) os << name << " = " << value << "\n";
        os << "\n";
    }
    return os.str();
}

KvConfig preset_config(const std::string& name) {
    if (name == "vivat") {
        return KvConfig::parse_text(R"(
[model]
padding_policy = "reflect"
decoder_norm = "scn"
latent_channels = 16

[train]
learning_rate = 1e-4
ema_decay = 0.9999
disc_start_step = 0

[loss]
lambda_kl = 1e-4
lambda_recon = 1.0
lambda_adv = 0.01
lambda_perc = 0.1
)",
                                    "preset:vivat");
    }
    if (name == "baseline") {
        return KvConfig::parse_text(R"(
[model]
padding_policy = "zero"
decoder_norm = "group_norm"
latent_channels = 16

[train]
learning_rate = 1e-4
ema_decay = 0.9999
disc_start_step = 0

[loss]
lambda_kl = 1e-3
lambda_recon = 1.0
lambda_adv = 0.1
lambda_perc = 0.1
)",
                                    "preset:baseline");
    }
    throw ConfigError("unknown preset '" + name + "' (expected 'baseline' or 'vivat')");
}

RunConfig run_config_from(const KvConfig& kv) {
    RunConfig rc;

    rc.model.input_channels = static_cast<int>(kv.get_int("model.input_channels", 3));
    rc.model.base_channels = static_cast<int>(kv.get_int("model.base_channels", 128));
    rc.model.channel_multipliers = kv.get_int_list("model.channel_multipliers", {1, 2, 2, 4});
    rc.model.downscale_factor = static_cast<int>(kv.get_int(
        "model.downscale_factor", 1 << (rc.model.channel_multipliers.size() - 1)));
    rc.model.latent_channels = static_cast<int>(kv.get_int("model.latent_channels", 16));
    {
        std::vector<int> def = {static_cast<int>(rc.model.channel_multipliers.size()) - 1};
        rc.model.attention_levels.clear();
        for (int a : kv.get_int_list("model.attention_levels", def))
            rc.model.attention_levels.insert(a);
    }
    std::string pad = kv.get_string("model.padding_policy", "reflect");
    if (pad == "zero")
        rc.model.padding_policy = PadPolicy::zero;
    else if (pad == "reflect")
        rc.model.padding_policy = PadPolicy::reflect;
    else
        throw ConfigError("config: model.padding_policy must be zero|reflect, got " + pad);
    std::string dn = kv.get_string("model.decoder_norm", "scn");
    if (dn == "group_norm")
        rc.model.decoder_norm = NormKind::group_norm;
    else if (dn == "scn")
        rc.model.decoder_norm = NormKind::scn;
    else
        throw ConfigError("config: model.decoder_norm must be group_norm|scn, got " + dn);
    rc.model.group_norm_groups = static_cast<int>(kv.get_int("model.group_norm_groups", 32));
    rc.model.blocks_per_level = static_cast<int>(kv.get_int("model.blocks_per_level", 2));

    rc.train.learning_rate = kv.get_double("train.learning_rate", 1e-4);
    rc.train.ema_decay = kv.get_double("train.ema_decay", 0.9999);
    rc.train.batch_size = static_cast<int>(kv.get_int("train.batch_size", 4));
    rc.train.max_steps = kv.get_int("train.max_steps", 1000);
    rc.train.disc_start_step = kv.get_int("train.disc_start_step", 0);
    std::string phase = kv.get_string("train.phase", "full");
    if (phase == "full")
        rc.train.phase = Phase::full;
    else if (phase == "decoder_only")
        rc.train.phase = Phase::decoder_only;
    else
        throw ConfigError("config: train.phase must be full|decoder_only, got " + phase);
    rc.train.seed = static_cast<uint64_t>(kv.get_int("train.seed", 0));
    std::string prec = kv.get_string("train.precision", "fp32");
    if (prec == "fp32")
        rc.train.precision = Precision::fp32;
    else if (prec == "fp64")
        rc.train.precision = Precision::fp64;
    else
        throw ConfigError("config: train.precision must be fp32|fp64, got " + prec);
    rc.train.adv_variant =
        adv_variant_from_string(kv.get_string("train.adv_variant", "non_saturating"));
    std::string dv = kv.get_string("train.disc_variant", "vanilla");
    if (dv == "vanilla")
        rc.train.disc_variant = DiscVariant::vanilla;
    else if (dv == "hinge")
        rc.train.disc_variant = DiscVariant::hinge;
    else
        throw ConfigError("config: train.disc_variant must be vanilla|hinge, got " + dv);
    rc.train.disc_learning_rate =
        kv.get_double("train.disc_learning_rate", rc.train.learning_rate);
    rc.train.checkpoint_every = kv.get_int("train.checkpoint_every", 0);

    rc.train.weights.lambda_kl = kv.get_double("loss.lambda_kl", 1e-4);
    rc.train.weights.lambda_recon = kv.get_double("loss.lambda_recon", 1.0);
    rc.train.weights.lambda_adv = kv.get_double("loss.lambda_adv", 0.01);
    rc.train.weights.lambda_perc = kv.get_double("loss.lambda_perc", 0.1);

    rc.train.disc.base_channels = static_cast<int>(kv.get_int("disc.base_channels", 32));
    rc.train.disc.layers = static_cast<int>(kv.get_int("disc.layers", 4));
    rc.train.disc.group_norm_groups = static_cast<int>(kv.get_int("disc.group_norm_groups", 8));

    {
        std::vector<int> ch = kv.get_int_list("perceptual.channels", {16, 32, 64});
        std::vector<double> wt =
            kv.get_double_list("perceptual.weights", std::vector<double>(ch.size(), 1.0));
        rc.train.perceptual.level_channels = ch;
        rc.train.perceptual.level_weights = wt;
        rc.train.perceptual.seed = static_cast<uint64_t>(kv.get_int("perceptual.seed", 1234));
    }

    std::string kind = kv.get_string("data.kind", "synthetic");
    if (kind == "synthetic")
        rc.data.kind = DatasetSource::Kind::synthetic;
    else if (kind == "directory")
        rc.data.kind = DatasetSource::Kind::directory;
    else
        throw ConfigError("config: data.kind must be synthetic|directory, got " + kind);
    rc.data.root = kv.get_string("data.root", "");
    rc.data.manifest = kv.get_string("data.manifest", "");
    rc.data.count = static_cast<int>(kv.get_int("data.count", 1000));
    rc.data.synth.seed = static_cast<uint64_t>(kv.get_int("data.synth_seed", 0));
    rc.data.synth.octaves = static_cast<int>(kv.get_int("data.synth_octaves", 4));
    rc.data.shuffle_seed = kv.has("data.shuffle_seed")
                               ? static_cast<uint64_t>(kv.get_int("data.shuffle_seed", 0))
                               : derive_seed(rc.train.seed, 0xda7aULL);
    if (rc.data.kind == DatasetSource::Kind::directory && rc.data.root.empty())
        throw ConfigError("config: missing field 'data.root' (required when data.kind = "
                          "\"directory\")");

    rc.preprocess.intermediate_short_side =
        static_cast<int>(kv.get_int("data.intermediate_short_side", 480));
    rc.preprocess.crop_size = static_cast<int>(kv.get_int("data.crop_size", 240));
    std::string filt = kv.get_string("data.resize_filter", "bicubic");
    if (filt == "bicubic")
        rc.preprocess.resize_filter = ResizeFilter::bicubic;
    else if (filt == "bilinear")
        rc.preprocess.resize_filter = ResizeFilter::bilinear;
    else if (filt == "nearest")
        rc.preprocess.resize_filter = ResizeFilter::nearest;
    else
        throw ConfigError("config: data.resize_filter must be bicubic|bilinear|nearest");
    std::string cm = kv.get_string("data.crop_mode", "random");
    if (cm == "random")
        rc.preprocess.crop_mode = CropMode::random;
    else if (cm == "center")
        rc.preprocess.crop_mode = CropMode::center;
    else
        throw ConfigError("config: data.crop_mode must be random|center");
    rc.preprocess.crop_before_resize = kv.get_bool("data.crop_before_resize", false);

    rc.detect.color_shift = kv.get_double("detect.color_shift", rc.detect.color_shift);
    rc.detect.grid = kv.get_double("detect.grid", rc.detect.grid);
    rc.detect.blur = kv.get_double("detect.blur", rc.detect.blur);
    rc.detect.blur_cutoff = kv.get_double("detect.blur_cutoff", rc.detect.blur_cutoff);
    rc.detect.corner = kv.get_double("detect.corner", rc.detect.corner);
    rc.detect.corner_band =
        static_cast<int>(kv.get_int("detect.corner_band", rc.detect.corner_band));
    rc.detect.droplet = kv.get_double("detect.droplet", rc.detect.droplet);
    rc.detect.droplet_window =
        static_cast<int>(kv.get_int("detect.droplet_window", rc.detect.droplet_window));

    rc.validate();
    return rc;
}

void RunConfig::validate() const {
    model.validate();
    train.validate();
    preprocess.validate();
    if (preprocess.crop_size % model.downscale_factor != 0)
        throw ConfigError("config: data.crop_size must be a multiple of the model downscale "
                          "factor " +
                          std::to_string(model.downscale_factor));
}

std::string RunConfig::dump_toml() const {
    KvConfig kv;
    kv.set("model.input_channels", std::to_string(model.input_channels));
    kv.set("model.base_channels", std::to_string(model.base_channels));
    {
        std::string s = "[";
        for (size_t i = 0; i < model.channel_multipliers.size(); ++i)
            s += (i ? ", " : "") + std::to_string(model.channel_multipliers[i]);
        kv.set("model.channel_multipliers", s + "]");
    }
    kv.set("model.downscale_factor", std::to_string(model.downscale_factor));
    kv.set("model.latent_channels", std::to_string(model.latent_channels));
    {
        std::string s = "[";
        bool first = true;
        for (int a : model.attention_levels) {
            s += (first ? "" : ", ") + std::to_string(a);
            first = false;
        }
        kv.set("model.attention_levels", s + "]");
    }
    kv.set("model.padding_policy", std::string("\"") + to_string(model.padding_policy) + "\"");
    kv.set("model.decoder_norm", std::string("\"") + to_string(model.decoder_norm) + "\"");
    kv.set("model.group_norm_groups", std::to_string(model.group_norm_groups));
    kv.set("model.blocks_per_level", std::to_string(model.blocks_per_level));

    auto fmt = [](double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    };
    kv.set("train.learning_rate", fmt(train.learning_rate));
    kv.set("train.ema_decay", fmt(train.ema_decay));
    kv.set("train.batch_size", std::to_string(train.batch_size));
    kv.set("train.max_steps", std::to_string(train.max_steps));
    kv.set("train.disc_start_step", train.disc_start_step == std::numeric_limits<int64_t>::max()
                                        ? "never"
                                        : std::to_string(train.disc_start_step));
    kv.set("train.phase", std::string("\"") + to_string(train.phase) + "\"");
    kv.set("train.seed", std::to_string(train.seed));
    kv.set("train.precision", std::string("\"") + to_string(train.precision) + "\"");
    kv.set("train.adv_variant", std::string("\"") + to_string(train.adv_variant) + "\"");
    kv.set("train.disc_variant",
           train.disc_variant == DiscVariant::vanilla ? "\"vanilla\"" : "\"hinge\"");
    kv.set("train.disc_learning_rate", fmt(train.disc_learning_rate));
    kv.set("train.checkpoint_every", std::to_string(train.checkpoint_every));

    kv.set("loss.lambda_kl", fmt(train.weights.lambda_kl));
    kv.set("loss.lambda_recon", fmt(train.weights.lambda_recon));
    kv.set("loss.lambda_adv", fmt(train.weights.lambda_adv));
    kv.set("loss.lambda_perc", fmt(train.weights.lambda_perc));

    kv.set("disc.base_channels", std::to_string(train.disc.base_channels));
    kv.set("disc.layers", std::to_string(train.disc.layers));
    kv.set("disc.group_norm_groups", std::to_string(train.disc.group_norm_groups));

    {
        std::string s = "[";
        for (size_t i = 0; i < train.perceptual.level_channels.size(); ++i)
            s += (i ? ", " : "") + std::to_string(train.perceptual.level_channels[i]);
        kv.set("perceptual.channels", s + "]");
        std::string w = "[";
        for (size_t i = 0; i < train.perceptual.level_weights.size(); ++i)
            w += (i ? ", " : "") + fmt(train.perceptual.level_weights[i]);
        kv.set("perceptual.weights", w + "]");
        kv.set("perceptual.seed", std::to_string(train.perceptual.seed));
    }

    kv.set("data.kind",
           data.kind == DatasetSource::Kind::synthetic ? "\"synthetic\"" : "\"directory\"");
    if (!data.root.empty()) kv.set("data.root", "\"" + data.root + "\"");
    if (!data.manifest.empty()) kv.set("data.manifest", "\"" + data.manifest + "\"");
    kv.set("data.count", std::to_string(data.count));
    kv.set("data.synth_seed", std::to_string(data.synth.seed));
    kv.set("data.synth_octaves", std::to_string(data.synth.octaves));
    kv.set("data.shuffle_seed", std::to_string(data.shuffle_seed));
    kv.set("data.intermediate_short_side", std::to_string(preprocess.intermediate_short_side));
    kv.set("data.crop_size", std::to_string(preprocess.crop_size));
    kv.set("data.resize_filter", std::string("\"") + to_string(preprocess.resize_filter) + "\"");
    kv.set("data.crop_mode", std::string("\"") + to_string(preprocess.crop_mode) + "\"");
    kv.set("data.crop_before_resize", preprocess.crop_before_resize ? "true" : "false");

    kv.set("detect.color_shift", fmt(detect.color_shift));
    kv.set("detect.grid", fmt(detect.grid));
    kv.set("detect.blur", fmt(detect.blur));
    kv.set("detect.blur_cutoff", fmt(detect.blur_cutoff));
    kv.set("detect.corner", fmt(detect.corner));
    kv.set("detect.corner_band", std::to_string(detect.corner_band));
    kv.set("detect.droplet", fmt(detect.droplet));
    kv.set("detect.droplet_window", std::to_string(detect.droplet_window));

    return kv.dump_toml();
}

}  // namespace vivat
