#pragma once

#include <set>
#include <vector>

#include <json.hpp>

#include "vivat/nn/blocks.hpp"

namespace vivat {

struct ModelConfig {
    int input_channels = 3;
    int base_channels = 128;
    std::vector<int> channel_multipliers = {1, 2, 2, 4};
    int downscale_factor = 8;  // f = 2^(levels-1)
    int latent_channels = 16;  // c
    std::set<int> attention_levels = {3};
    PadPolicy padding_policy = PadPolicy::reflect;
    NormKind decoder_norm = NormKind::scn;
    int group_norm_groups = 32;
    int blocks_per_level = 2;

    int levels() const { return static_cast<int>(channel_multipliers.size()); }
    int width(int level) const { return base_channels * channel_multipliers[level]; }
    int top_width() const { return width(levels() - 1); }

    void validate() const {
        if (input_channels < 1 || base_channels < 1 || latent_channels < 1 ||
            group_norm_groups < 1 || blocks_per_level < 1)
            throw ConfigError("model: all counts must be >= 1");
        if (channel_multipliers.empty()) throw ConfigError("model: channel_multipliers empty");
        for (int m : channel_multipliers)
            if (m < 1) throw ConfigError("model: channel multipliers must be >= 1");
        int expected_f = 1 << (levels() - 1);
        if (downscale_factor != expected_f)
            throw ConfigError("model: downscale_factor " + std::to_string(downscale_factor) +
                              " must equal 2^(levels-1) = " + std::to_string(expected_f));
        for (int level = 0; level < levels(); ++level)
            if (width(level) % group_norm_groups != 0)
                throw ConfigError("model: group_norm_groups " +
                                  std::to_string(group_norm_groups) +
                                  " must divide channel width " + std::to_string(width(level)));
        for (int a : attention_levels)
            if (a < 0 || a >= levels())
                throw ConfigError("model: attention level " + std::to_string(a) +
                                  " out of range");
    }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"input_channels", c.input_channels},
                       {"base_channels", c.base_channels},
                       {"channel_multipliers", c.channel_multipliers},
                       {"downscale_factor", c.downscale_factor},
                       {"latent_channels", c.latent_channels},
                       {"attention_levels", c.attention_levels},
                       {"padding_policy", to_string(c.padding_policy)},
                       {"decoder_norm", to_string(c.decoder_norm)},
                       {"group_norm_groups", c.group_norm_groups},
                       {"blocks_per_level", c.blocks_per_level}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    j.at("input_channels").get_to(c.input_channels);
    j.at("base_channels").get_to(c.base_channels);
    j.at("channel_multipliers").get_to(c.channel_multipliers);
    j.at("downscale_factor").get_to(c.downscale_factor);
    j.at("latent_channels").get_to(c.latent_channels);
    c.attention_levels.clear();
    for (const auto& a : j.at("attention_levels")) c.attention_levels.insert(a.get<int>());
    std::string pad = j.at("padding_policy").get<std::string>();
    if (pad == "zero")
        c.padding_policy = PadPolicy::zero;
    else if (pad == "reflect")
        c.padding_policy = PadPolicy::reflect;
    else
        throw ConfigError("model: unknown padding_policy '" + pad + "'");
    std::string dn = j.at("decoder_norm").get<std::string>();
    if (dn == "group_norm")
        c.decoder_norm = NormKind::group_norm;
    else if (dn == "scn")
        c.decoder_norm = NormKind::scn;
    else
        throw ConfigError("model: unknown decoder_norm '" + dn + "'");
    j.at("group_norm_groups").get_to(c.group_norm_groups);
    j.at("blocks_per_level").get_to(c.blocks_per_level);
}

}  // namespace vivat
