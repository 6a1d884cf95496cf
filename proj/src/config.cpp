#include "ctface/config.hpp"

#include <fstream>
#include <sstream>

#include "ctface/error.hpp"
#include "ctface/text.hpp"

namespace ctface {

AngleGrid parse_angle_grid(std::string_view text) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw ConfigError("angle grid must be first:last:count, got '" + std::string(text) + "'");
    try {
        AngleGrid g{parse_real(parts[0]), parse_real(parts[1]), static_cast<int>(parse_int(parts[2]))};
        if (g.count < 1) throw ConfigError("angle grid count must be >= 1");
        return g;
    } catch (const FormatError& e) {
        throw ConfigError(std::string("bad angle grid: ") + e.what());
    }
}

namespace {

std::string format_grid(const AngleGrid& g) {
    return format_real(g.first) + ":" + format_real(g.last) + ":" + std::to_string(g.count);
}

bool parse_bool(std::string_view v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("expected a boolean, got '" + std::string(v) + "'");
}

}  // namespace

void PipelineConfig::set(std::string_view key, std::string_view value) {
    value = trim(value);
    auto real = [&] { return parse_real(value); };
    auto integer = [&] { return static_cast<int>(parse_int(value)); };
    try {
        if (key == "spacing") {
            const auto parts = split(value, ',');
            if (parts.size() == 1) {
                const double s = parse_real(parts[0]);
                target_spacing = {s, s, s};
            } else if (parts.size() == 3) {
                target_spacing = {parse_real(parts[0]), parse_real(parts[1]), parse_real(parts[2])};
            } else {
                throw ConfigError("spacing must be one value or sx,sy,sz");
            }
        } else if (key == "sigma") {
            heatmap_sigma = real();
        } else if (key == "tau") {
            decode_tau = real();
        } else if (key == "margin-factor") {
            margin_factor = real();
        } else if (key == "gamma") {
            gamma = real();
        } else if (key == "theta") {
            sweep.cull_theta_deg = real();
        } else if (key == "sweep-pitch") {
            sweep.pitch = parse_angle_grid(value);
        } else if (key == "sweep-roll") {
            sweep.roll = parse_angle_grid(value);
        } else if (key == "sweep-yaw") {
            sweep.yaw = parse_angle_grid(value);
        } else if (key == "sc") {
            sweep.scale_mm = real();
        } else if (key == "image-size") {
            const int n = integer();
            sweep.width = sweep.height = n;
            sweep.u0 = sweep.v0 = n / 2.0;
        } else if (key == "u0") {
            sweep.u0 = real();
        } else if (key == "v0") {
            sweep.v0 = real();
        } else if (key == "theta-norm") {
            if (value == "auto") {
                theta_norm.reset();
            } else {
                theta_norm = real();
            }
        } else if (key == "norm-percentile") {
            norm_percentile = real();
        } else if (key == "C") {
            scale_c = real();
        } else if (key == "crop-size") {
            crop_size = integer();
        } else if (key == "crop-mode") {
            if (value == "center") {
                crop_mode = CropMode::Center;
            } else if (value == "random") {
                crop_mode = CropMode::Random;
            } else {
                throw ConfigError("crop-mode must be center or random");
            }
        } else if (key == "E") {
            group_size = integer();
        } else if (key == "L") {
            labels_per_batch = integer();
        } else if (key == "margin") {
            margin = real();
        } else if (key == "loss") {
            if (value == "hinge") {
                loss = LossVariant::Hinge;
            } else if (value == "absolute") {
                loss = LossVariant::Absolute;
            } else {
                throw ConfigError("loss must be hinge or absolute");
            }
        } else if (key == "shuffle-across-scans") {
            shuffle_across_scans = parse_bool(value);
        } else if (key == "epochs") {
            epochs = integer();
        } else if (key == "split-ratio") {
            split_ratio = real();
        } else if (key == "folds") {
            folds = integer();
        } else if (key == "seed") {
            const long long s = parse_int(value);
            if (s < 0) throw ConfigError("seed must be non-negative");
            seed = static_cast<std::uint64_t>(s);
        } else if (key == "impostor-ratio") {
            impostor_ratio = real();
        } else if (key == "stage") {
            stage = parse_stage(value);
        } else if (key == "keep-stages") {
            keep_stages = parse_bool(value);
        } else if (key == "threads") {
            threads = integer();
        } else {
            throw ConfigError("unknown config key '" + std::string(key) + "'");
        }
    } catch (const FormatError& e) {
        throw ConfigError("bad value for '" + std::string(key) + "': " + e.what());
    }
}

void PipelineConfig::validate() const {
    for (int a = 0; a < 3; ++a)
        if (!(target_spacing[a] > 0.0)) throw ConfigError("spacing must be positive");
    if (!(heatmap_sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (!(decode_tau > 0.0 && decode_tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
    if (!(margin_factor >= 0.0)) throw ConfigError("margin-factor must be >= 0");
    if (!std::isfinite(gamma)) throw ConfigError("gamma must be finite");
    if (!(sweep.cull_theta_deg > 0.0 && sweep.cull_theta_deg <= 180.0)) throw ConfigError("theta must lie in (0, 180]");
    if (sweep.pitch.first < -90.0 || sweep.pitch.last > 90.0 || sweep.pitch.last < -90.0 || sweep.pitch.first > 90.0)
        throw ConfigError("pitch angles must lie in [-90, 90]");
    if (!(sweep.scale_mm > 0.0)) throw ConfigError("sc must be positive");
    if (sweep.width < 1 || sweep.height < 1) throw ConfigError("image-size must be positive");
    if (!(scale_c > 0.0)) throw ConfigError("C must be positive");
    if (!(norm_percentile >= 0.0 && norm_percentile <= 100.0)) throw ConfigError("norm-percentile must lie in [0, 100]");
    if (crop_size < 1 || crop_size > sweep.width || crop_size > sweep.height)
        throw ConfigError("crop-size must be between 1 and the image size");
    if (crop_size < 16) throw ConfigError("crop-size must be at least the 16-pixel embedding grid");
    if (group_size < 2) throw ConfigError("E must be >= 2");
    if (labels_per_batch < 1) throw ConfigError("L must be >= 1");
    if (!(margin >= 0.0)) throw ConfigError("margin must be >= 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split-ratio must lie in (0, 1)");
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (!(impostor_ratio >= 0.0)) throw ConfigError("impostor-ratio must be >= 0");
    if (threads < 0) throw ConfigError("threads must be >= 0");
}

std::string PipelineConfig::to_text() const {
    std::ostringstream o;
    o << "spacing = " << format_real(target_spacing.x) << ',' << format_real(target_spacing.y) << ','
      << format_real(target_spacing.z) << '\n';
    o << "sigma = " << format_real(heatmap_sigma) << '\n';
    o << "tau = " << format_real(decode_tau) << '\n';
    o << "margin-factor = " << format_real(margin_factor) << '\n';
    o << "gamma = " << format_real(gamma) << '\n';
    o << "theta = " << format_real(sweep.cull_theta_deg) << '\n';
    o << "sweep-pitch = " << format_grid(sweep.pitch) << '\n';
    o << "sweep-roll = " << format_grid(sweep.roll) << '\n';
    o << "sweep-yaw = " << format_grid(sweep.yaw) << '\n';
    o << "sc = " << format_real(sweep.scale_mm) << '\n';
    o << "image-size = " << sweep.width << '\n';
    o << "u0 = " << format_real(sweep.u0) << '\n';
    o << "v0 = " << format_real(sweep.v0) << '\n';
    o << "theta-norm = " << (theta_norm ? format_real(*theta_norm) : std::string("auto")) << '\n';
    o << "norm-percentile = " << format_real(norm_percentile) << '\n';
    o << "C = " << format_real(scale_c) << '\n';
    o << "crop-size = " << crop_size << '\n';
    o << "crop-mode = " << (crop_mode == CropMode::Center ? "center" : "random") << '\n';
    o << "E = " << group_size << '\n';
    o << "L = " << labels_per_batch << '\n';
    o << "margin = " << format_real(margin) << '\n';
    o << "loss = " << (loss == LossVariant::Hinge ? "hinge" : "absolute") << '\n';
    o << "shuffle-across-scans = " << (shuffle_across_scans ? "true" : "false") << '\n';
    o << "epochs = " << epochs << '\n';
    o << "split-ratio = " << format_real(split_ratio) << '\n';
    o << "folds = " << folds << '\n';
    o << "seed = " << seed << '\n';
    o << "impostor-ratio = " << format_real(impostor_ratio) << '\n';
    o << "stage = " << stage_name(stage) << '\n';
    o << "keep-stages = " << (keep_stages ? "true" : "false") << '\n';
    o << "threads = " << threads << '\n';
    return o.str();
}

void load_config_file(const std::filesystem::path& path, PipelineConfig& config) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = line;
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = trim(view);
        if (view.empty()) continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        config.set(trim(view.substr(0, eq)), trim(view.substr(eq + 1)));
    }
}

}  // namespace ctface
