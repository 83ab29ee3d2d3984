#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "zsseg/datagen.hpp"
#include "zsseg/metrics.hpp"
#include "zsseg/training.hpp"

namespace zsseg {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Direction { a_to_b, b_to_a };

// Toy-scale stage-2 optimizer settings used by the default experiment.
inline OptimizerConfig toy_optimizer() {
    OptimizerConfig o;
    o.model = {0.01, 0.9, 5e-4};
    o.disc = {3e-4, 0.9, 0.99, 1e-8};
    o.epochs = 60;
    o.batch_size = 8;
    o.grad_clip = 1.0;
    return o;
}

struct ExperimentConfig {
    BundleConfig data;  // data.unseen and data.swap_modalities are derived from the fields below
    NetworkConfig net;
    PriorConfig prior;
    OptimizerConfig train = toy_optimizer();
    LossWeights weights;
    MetricOptions metrics;
    char setting = 'g';
    std::vector<int> unseen{1};
    Direction direction = Direction::a_to_b;
    std::uint64_t seed = 7;
    std::string out = "runs";

    // Dataset configuration with the experiment's unseen set and direction applied.
    [[nodiscard]] BundleConfig bundle_config() const {
        BundleConfig b = data;
        b.unseen = unseen;
        b.swap_modalities = direction == Direction::b_to_a;
        return b;
    }

    [[nodiscard]] NetworkConfig network_config() const {
        NetworkConfig n = net;
        n.image_size = data.layout.size;
        n.num_classes = data.layout.num_classes();
        return n;
    }

    void validate() const {
        if (setting < 'a' || setting > 'g') throw ConfigError(std::string("unknown setting '") + setting + "'");
        data.layout.validate();
        validate_unseen(unseen, data.layout.num_classes());
        network_config().validate();
        weights.validate();
        if (train.epochs < 1 || train.batch_size < 1 || prior.epochs < 0 || prior.batch_size < 1)
            throw ConfigError("epochs and batch sizes must be positive");
        if (!(train.model.lr > 0.0 && train.disc.lr > 0.0 && prior.sgd.lr > 0.0))
            throw ConfigError("learning rates must be > 0");
        if (!(metrics.spacing.y > 0.0 && metrics.spacing.x > 0.0)) throw ConfigError("spacing must be > 0");
    }
};

namespace cfgio {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (s.empty()) return out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(trim(cur));
    return out;
}

// Shortest representation that parses back to the same double.
inline std::string fmt_real(Real v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline Real parse_real(const std::string& s) {
    Real v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("not a number: '" + s + "'");
    return v;
}

template <typename Int>
Int parse_int(const std::string& s) {
    Int v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("not an integer: '" + s + "'");
    return v;
}

inline bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("not a boolean: '" + s + "'");
}

inline std::string fmt_reals(const std::vector<Real>& v, char sep = ',') {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += sep;
        s += fmt_real(v[i]);
    }
    return s;
}

inline std::vector<Real> parse_reals(const std::string& s, char sep = ',') {
    std::vector<Real> v;
    for (const auto& t : split(s, sep)) v.push_back(parse_real(t));
    return v;
}

template <std::size_t N>
std::array<Real, N> parse_reals_n(const std::string& s) {
    const auto v = parse_reals(s);
    if (v.size() != N) throw ConfigError("expected " + std::to_string(N) + " values: '" + s + "'");
    std::array<Real, N> a{};
    std::copy(v.begin(), v.end(), a.begin());
    return a;
}

inline std::string fmt_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

inline std::vector<int> parse_ints(const std::string& s) {
    std::vector<int> v;
    for (const auto& t : split(s, ',')) v.push_back(parse_int<int>(t));
    return v;
}

inline std::string fmt_template(const StructureTemplate& t) {
    return t.name + ":" + fmt_real(t.cx) + ":" + fmt_real(t.cy) + ":" + fmt_real(t.rx) + ":" + fmt_real(t.ry);
}

inline StructureTemplate parse_template(const std::string& s) {
    const auto p = split(s, ':');
    if (p.size() != 5 || p[0].empty()) throw ConfigError("structure must be name:cx:cy:rx:ry, got '" + s + "'");
    return {p[0], parse_real(p[1]), parse_real(p[2]), parse_real(p[3]), parse_real(p[4])};
}

struct Field {
    std::string key;
    std::string comment;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define ZSSEG_REAL(KEY, EXPR, DOC)                                                      \
    Field {                                                                              \
        KEY, DOC, [](const ExperimentConfig& c) { return fmt_real(c.EXPR); },            \
            [](ExperimentConfig& c, const std::string& v) { c.EXPR = parse_real(v); }    \
    }
#define ZSSEG_INT(KEY, EXPR, DOC)                                                                     \
    Field {                                                                                             \
        KEY, DOC, [](const ExperimentConfig& c) { return std::to_string(c.EXPR); },                    \
            [](ExperimentConfig& c, const std::string& v) { c.EXPR = parse_int<decltype(c.EXPR)>(v); } \
    }
#define ZSSEG_BOOL(KEY, EXPR, DOC)                                                        \
    Field {                                                                                \
        KEY, DOC, [](const ExperimentConfig& c) { return std::string(c.EXPR ? "true" : "false"); }, \
            [](ExperimentConfig& c, const std::string& v) { c.EXPR = parse_bool(v); }      \
    }

inline void add_profile(std::vector<Field>& f, const std::string& prefix, bool second) {
    const auto pick = [second](ExperimentConfig& c) -> ModalityProfile& { return second ? c.data.profile_b : c.data.profile_a; };
    const auto cpick = [second](const ExperimentConfig& c) -> const ModalityProfile& {
        return second ? c.data.profile_b : c.data.profile_a;
    };
    f.push_back({prefix + ".name", "", [cpick](const ExperimentConfig& c) { return cpick(c).name; },
                 [pick](ExperimentConfig& c, const std::string& v) { pick(c).name = v; }});
    f.push_back({prefix + ".base", "intensity of background tissue, then each structure, in [0,1]",
                 [cpick](const ExperimentConfig& c) { return fmt_reals(cpick(c).base); },
                 [pick](ExperimentConfig& c, const std::string& v) { pick(c).base = parse_reals(v); }});
    const std::pair<const char*, Real ModalityProfile::*> reals[] = {
        {"air", &ModalityProfile::air},       {"gamma", &ModalityProfile::gamma},
        {"gain", &ModalityProfile::gain},     {"offset", &ModalityProfile::offset},
        {"bias_amplitude", &ModalityProfile::bias_amplitude}, {"noise_sigma", &ModalityProfile::noise_sigma}};
    for (const auto& [name, member] : reals) {
        const auto m = member;
        f.push_back({prefix + "." + name, "", [cpick, m](const ExperimentConfig& c) { return fmt_real(cpick(c).*m); },
                     [pick, m](ExperimentConfig& c, const std::string& v) { pick(c).*m = parse_real(v); }});
    }
}

inline const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back({"experiment.setting", "ablation setting a-g",
                     [](const ExperimentConfig& c) { return std::string(1, c.setting); },
                     [](ExperimentConfig& c, const std::string& v) {
                         if (v.size() != 1) throw ConfigError("setting must be one letter a-g");
                         c.setting = v[0];
                     }});
        f.push_back({"experiment.unseen", "comma-separated structure indices (1-based); empty = fully supervised",
                     [](const ExperimentConfig& c) { return fmt_ints(c.unseen); },
                     [](ExperimentConfig& c, const std::string& v) { c.unseen = parse_ints(v); }});
        f.push_back({"experiment.direction", "a2b: prior on modality A, target B; b2a swaps the roles",
                     [](const ExperimentConfig& c) { return std::string(c.direction == Direction::a_to_b ? "a2b" : "b2a"); },
                     [](ExperimentConfig& c, const std::string& v) {
                         if (v == "a2b") c.direction = Direction::a_to_b;
                         else if (v == "b2a") c.direction = Direction::b_to_a;
                         else throw ConfigError("direction must be a2b or b2a");
                     }});
        f.push_back(ZSSEG_INT("experiment.seed", seed, "stage-2 initialisation and batch order"));
        f.push_back({"experiment.out", "output directory", [](const ExperimentConfig& c) { return c.out; },
                     [](ExperimentConfig& c, const std::string& v) { c.out = v; }});

        f.push_back(ZSSEG_INT("data.image_size", data.layout.size, "square image extent in pixels"));
        f.push_back(ZSSEG_INT("data.n_a", data.n_a, "prior-modality images"));
        f.push_back(ZSSEG_INT("data.n_b", data.n_b, "target-modality images"));
        f.push_back(ZSSEG_REAL("data.train_fraction", data.train_fraction, "target train/test split"));
        f.push_back(ZSSEG_INT("data.seed", data.seed, ""));
        f.push_back({"data.structures", "name:cx:cy:rx:ry per structure (fractions of the extent)",
                     [](const ExperimentConfig& c) {
                         std::string s;
                         for (std::size_t i = 0; i < c.data.layout.structures.size(); ++i) {
                             if (i) s += ',';
                             s += fmt_template(c.data.layout.structures[i]);
                         }
                         return s;
                     },
                     [](ExperimentConfig& c, const std::string& v) {
                         c.data.layout.structures.clear();
                         for (const auto& t : split(v, ',')) c.data.layout.structures.push_back(parse_template(t));
                     }});
        f.push_back(ZSSEG_REAL("data.position_jitter", data.layout.position_jitter, ""));
        f.push_back(ZSSEG_REAL("data.scale_min", data.layout.scale_min, ""));
        f.push_back(ZSSEG_REAL("data.scale_max", data.layout.scale_max, ""));
        f.push_back(ZSSEG_REAL("data.max_rotation", data.layout.max_rotation, "radians"));
        f.push_back({"data.body", "body outline cx:cy:rx:ry",
                     [](const ExperimentConfig& c) {
                         const auto& b = c.data.layout.body;
                         return fmt_reals({b.cx, b.cy, b.rx, b.ry}, ':');
                     },
                     [](ExperimentConfig& c, const std::string& v) {
                         const auto p = parse_reals(v, ':');
                         if (p.size() != 4) throw ConfigError("data.body must be cx:cy:rx:ry");
                         c.data.layout.body = {"body", p[0], p[1], p[2], p[3]};
                     }});
        f.push_back(ZSSEG_REAL("data.body_jitter", data.layout.body_jitter, ""));
        f.push_back(ZSSEG_REAL("data.body_scale_min", data.layout.body_scale_min, ""));
        f.push_back(ZSSEG_REAL("data.body_scale_max", data.layout.body_scale_max, ""));
        f.push_back(ZSSEG_REAL("data.body_max_rotation", data.layout.body_max_rotation, ""));
        add_profile(f, "profile_a", false);
        add_profile(f, "profile_b", true);

        f.push_back(ZSSEG_INT("net.feature_channels", net.feature_channels, ""));
        f.push_back(ZSSEG_INT("net.backbone_width", net.backbone_width, ""));
        f.push_back(ZSSEG_INT("net.segmentor_hidden", net.segmentor_hidden, ""));
        f.push_back(ZSSEG_INT("net.fusion_hidden", net.fusion_hidden, ""));
        f.push_back({"net.discriminator_widths", "",
                     [](const ExperimentConfig& c) {
                         const auto& w = c.net.discriminator_widths;
                         return fmt_ints({w[0], w[1], w[2]});
                     },
                     [](ExperimentConfig& c, const std::string& v) {
                         const auto w = parse_ints(v);
                         if (w.size() != 3) throw ConfigError("net.discriminator_widths needs 3 values");
                         c.net.discriminator_widths = {w[0], w[1], w[2]};
                     }});
        f.push_back(ZSSEG_REAL("net.discriminator_slope", net.discriminator_slope, "LeakyReLU slope"));
        f.push_back(ZSSEG_BOOL("net.use_bias", net.use_bias, ""));
        f.push_back({"net.disc_input", "probabilities or logits",
                     [](const ExperimentConfig& c) {
                         return std::string(c.net.disc_input == DiscriminatorInput::logits ? "logits" : "probabilities");
                     },
                     [](ExperimentConfig& c, const std::string& v) {
                         if (v == "logits") c.net.disc_input = DiscriminatorInput::logits;
                         else if (v == "probabilities") c.net.disc_input = DiscriminatorInput::probabilities;
                         else throw ConfigError("net.disc_input must be probabilities or logits");
                     }});
        f.push_back(ZSSEG_INT("net.init_seed", net.init_seed, ""));

        f.push_back(ZSSEG_REAL("prior.lr", prior.sgd.lr, ""));
        f.push_back(ZSSEG_REAL("prior.momentum", prior.sgd.momentum, ""));
        f.push_back(ZSSEG_REAL("prior.weight_decay", prior.sgd.weight_decay, ""));
        f.push_back(ZSSEG_INT("prior.epochs", prior.epochs, ""));
        f.push_back(ZSSEG_INT("prior.batch_size", prior.batch_size, ""));
        f.push_back(ZSSEG_INT("prior.seed", prior.seed, ""));

        f.push_back(ZSSEG_REAL("train.lr", train.model.lr, "zero-shot model SGD"));
        f.push_back(ZSSEG_REAL("train.momentum", train.model.momentum, ""));
        f.push_back(ZSSEG_REAL("train.weight_decay", train.model.weight_decay, ""));
        f.push_back(ZSSEG_REAL("train.disc_lr", train.disc.lr, "discriminator Adam"));
        f.push_back(ZSSEG_REAL("train.disc_beta1", train.disc.beta1, ""));
        f.push_back(ZSSEG_REAL("train.disc_beta2", train.disc.beta2, ""));
        f.push_back(ZSSEG_REAL("train.disc_eps", train.disc.eps, ""));
        f.push_back(ZSSEG_INT("train.epochs", train.epochs, ""));
        f.push_back(ZSSEG_INT("train.batch_size", train.batch_size, ""));
        f.push_back(ZSSEG_BOOL("train.poly_decay", train.poly_decay, ""));
        f.push_back(ZSSEG_REAL("train.poly_power", train.poly_power, ""));
        f.push_back(ZSSEG_REAL("train.grad_clip", train.grad_clip, "global-norm clip, 0 = off"));
        f.push_back(ZSSEG_INT("train.checkpoint_every", train.checkpoint_every, "epochs, 0 = final only"));

        f.push_back({"loss.lambda", "discriminator weights: real, prior-seg on zero-shot features, zero-shot seg on prior features, zero-shot",
                     [](const ExperimentConfig& c) {
                         const auto& l = c.weights.lambda;
                         return fmt_reals({l.begin(), l.end()});
                     },
                     [](ExperimentConfig& c, const std::string& v) { c.weights.lambda = parse_reals_n<4>(v); }});
        f.push_back({"loss.omega", "L_Cross, L_Seen, L_Bg, L_Adv",
                     [](const ExperimentConfig& c) {
                         const auto& o = c.weights.omega;
                         return fmt_reals({o.begin(), o.end()});
                     },
                     [](ExperimentConfig& c, const std::string& v) { c.weights.omega = parse_reals_n<4>(v); }});

        f.push_back({"metrics.dice_mode", "pooled or per_image",
                     [](const ExperimentConfig& c) {
                         return std::string(c.metrics.dice_mode == DiceMode::pooled ? "pooled" : "per_image");
                     },
                     [](ExperimentConfig& c, const std::string& v) {
                         if (v == "pooled") c.metrics.dice_mode = DiceMode::pooled;
                         else if (v == "per_image") c.metrics.dice_mode = DiceMode::per_image;
                         else throw ConfigError("metrics.dice_mode must be pooled or per_image");
                     }});
        f.push_back({"metrics.spacing", "pixel spacing y,x for ASSD",
                     [](const ExperimentConfig& c) { return fmt_reals({c.metrics.spacing.y, c.metrics.spacing.x}); },
                     [](ExperimentConfig& c, const std::string& v) {
                         const auto s = parse_reals_n<2>(v);
                         c.metrics.spacing = {s[0], s[1]};
                     }});
        return f;
    }();
    return table;
}

#undef ZSSEG_REAL
#undef ZSSEG_INT
#undef ZSSEG_BOOL

}  // namespace cfgio

inline std::string format_config(const ExperimentConfig& c) {
    std::ostringstream os;
    std::string section;
    for (const auto& f : cfgio::fields()) {
        const std::string s = f.key.substr(0, f.key.find('.'));
        if (s != section) {
            if (!section.empty()) os << '\n';
            os << "# " << s << '\n';
            section = s;
        }
        if (!f.comment.empty()) os << "# " << f.comment << '\n';
        os << f.key << " = " << f.get(c) << '\n';
    }
    return os.str();
}

// Applies `key = value` lines on top of `base`.  Unknown keys are errors.
inline ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {}) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = cfgio::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = cfgio::trim(std::string_view(t).substr(0, eq));
        const std::string value = cfgio::trim(std::string_view(t).substr(eq + 1));
        const auto& fs = cfgio::fields();
        const auto it = std::find_if(fs.begin(), fs.end(), [&](const cfgio::Field& f) { return f.key == key; });
        if (it == fs.end()) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        try {
            it->set(base, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + " (" + key + "): " + e.what());
        }
    }
    return base;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
    return parse_config(read_text_file(path), std::move(base));
}

inline void save_config(const std::string& path, const ExperimentConfig& c) { write_text_file(path, format_config(c)); }

}  // namespace zsseg
