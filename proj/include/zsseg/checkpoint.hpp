#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "zsseg/io.hpp"
#include "zsseg/nets.hpp"

namespace zsseg {

inline nlohmann::ordered_json network_config_to_json(const NetworkConfig& c) {
    return {{"image_size", c.image_size},
            {"num_classes", c.num_classes},
            {"feature_channels", c.feature_channels},
            {"backbone_width", c.backbone_width},
            {"segmentor_hidden", c.segmentor_hidden},
            {"fusion_hidden", c.fusion_hidden},
            {"discriminator_widths", c.discriminator_widths},
            {"discriminator_slope", c.discriminator_slope},
            {"use_bias", c.use_bias},
            {"disc_input", c.disc_input == DiscriminatorInput::logits ? "logits" : "probabilities"},
            {"init_seed", c.init_seed}};
}

inline NetworkConfig network_config_from_json(const nlohmann::ordered_json& j) {
    NetworkConfig c;
    c.image_size = j.at("image_size").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.feature_channels = j.at("feature_channels").get<int>();
    c.backbone_width = j.at("backbone_width").get<int>();
    c.segmentor_hidden = j.at("segmentor_hidden").get<int>();
    c.fusion_hidden = j.at("fusion_hidden").get<int>();
    c.discriminator_widths = j.at("discriminator_widths").get<std::array<int, 3>>();
    c.discriminator_slope = j.at("discriminator_slope").get<Real>();
    c.use_bias = j.at("use_bias").get<bool>();
    const auto mode = j.at("disc_input").get<std::string>();
    if (mode != "logits" && mode != "probabilities") throw FormatError("unknown disc_input '" + mode + "'");
    c.disc_input = mode == "logits" ? DiscriminatorInput::logits : DiscriminatorInput::probabilities;
    c.init_seed = j.at("init_seed").get<std::uint64_t>();
    c.validate();
    return c;
}

// FNV-1a over parameter names and raw value bytes.
template <typename Net>
std::uint64_t parameter_hash(const Net& net) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto feed = [&](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    net.visit([&](const Parameter& p) {
        feed(p.name.data(), p.name.size());
        feed(p.value.data(), p.value.size() * sizeof(Real));
    });
    return h;
}

template <typename Net>
Container to_container(const Net& net, std::int64_t step, const std::string& role) {
    Container c;
    net.visit([&](const Parameter& p) {
        std::vector<std::int64_t> shape(p.dims.begin(), p.dims.end());
        c.arrays.push_back(NamedArray::from_f64(p.name, shape, p.value));
    });
    c.metadata["format"] = "zsseg-checkpoint/1";
    c.metadata["role"] = role;
    c.metadata["step"] = std::to_string(step);
    c.metadata["network_config"] = network_config_to_json(net.config).dump();
    return c;
}

// Copies every parameter of `net` from the container; shapes must match.
template <typename Net>
void from_container(const Container& c, Net& net) {
    net.visit([&](Parameter& p) {
        const NamedArray& a = c.get(p.name);
        if (a.shape != std::vector<std::int64_t>(p.dims.begin(), p.dims.end()))
            throw FormatError("parameter '" + p.name + "': shape mismatch");
        p.value = a.as_f64();
        p.zero_grad();
    });
}

struct CheckpointInfo {
    NetworkConfig config;
    std::int64_t step = 0;
    std::string role;
};

inline CheckpointInfo checkpoint_info(const Container& c) {
    if (c.meta("format") != "zsseg-checkpoint/1") throw FormatError("not a checkpoint container");
    CheckpointInfo info;
    info.config = network_config_from_json(nlohmann::ordered_json::parse(c.meta("network_config")));
    info.step = std::stoll(c.meta("step"));
    info.role = c.meta("role");
    return info;
}

template <typename Net>
void save_checkpoint(const std::string& path, const Net& net, std::int64_t step, const std::string& role) {
    save_container(path, to_container(net, step, role));
}

template <typename Net>
Net load_checkpoint(const std::string& path, std::int64_t* step = nullptr) {
    const Container c = load_container(path);
    const CheckpointInfo info = checkpoint_info(c);
    Net net(info.config);
    from_container(c, net);
    if (step) *step = info.step;
    return net;
}

}  // namespace zsseg
