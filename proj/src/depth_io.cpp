#include "ctface/depth_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string_view>
#include <vector>

#include "ctface/error.hpp"
#include "ctface/text.hpp"

namespace ctface {

std::filesystem::path sidecar_path(const std::filesystem::path& pgm_path) {
    std::filesystem::path p = pgm_path;
    p.replace_extension(".pose");
    return p;
}

std::string format_sidecar(const DepthImage& image) {
    const CameraPose& p = image.pose;
    std::string line;
    line += "patient=" + std::to_string(image.ids.patient);
    line += " scan=" + std::to_string(image.ids.scan);
    line += " pose=" + std::to_string(image.ids.pose);
    line += " stage=" + std::string(stage_name(image.stage));
    line += " pitch=" + format_real(p.pitch_deg);
    line += " roll=" + format_real(p.roll_deg);
    line += " yaw=" + format_real(p.yaw_deg);
    line += " sc=" + format_real(p.scale_mm);
    line += " u0=" + format_real(p.u0);
    line += " v0=" + format_real(p.v0);
    line += " target=" + format_real(p.target.x) + "," + format_real(p.target.y) + "," + format_real(p.target.z);
    line += " distance=" + format_real(p.distance);
    return line;
}

void save_depth_image(const DepthImage& image, const std::filesystem::path& pgm_path) {
    image.validate();
    std::ofstream out(pgm_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write depth image " + pgm_path.string());
    const std::string header =
        "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n65535\n";
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    std::vector<unsigned char> bytes(image.depth.size() * 2);
    for (std::size_t i = 0; i < image.depth.size(); ++i) {
        const double scaled = std::nearbyint(image.depth[i] * 100.0);
        if (scaled > 65535.0) throw FormatError("depth exceeds the 655.35 mm PGM range in " + pgm_path.string());
        const auto value = static_cast<std::uint16_t>(scaled);
        bytes[2 * i] = static_cast<unsigned char>(value >> 8);
        bytes[2 * i + 1] = static_cast<unsigned char>(value & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing depth image " + pgm_path.string());

    std::ofstream side(sidecar_path(pgm_path), std::ios::trunc);
    if (!side) throw IoError("cannot write sidecar for " + pgm_path.string());
    side << format_sidecar(image) << '\n';
}

namespace {

std::string read_pgm_token(std::istream& in) {
    std::string token;
    char ch;
    while (in.get(ch)) {
        if (ch == '#') {
            while (in.get(ch) && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!token.empty()) break;
            continue;
        }
        token += ch;
    }
    return token;
}

}  // namespace

DepthImage load_depth_image(const std::filesystem::path& pgm_path) {
    std::ifstream in(pgm_path, std::ios::binary);
    if (!in) throw IoError("cannot open depth image " + pgm_path.string());
    if (read_pgm_token(in) != "P5") throw FormatError("not a binary PGM: " + pgm_path.string());
    const long long w = parse_int(read_pgm_token(in));
    const long long h = parse_int(read_pgm_token(in));
    const long long maxval = parse_int(read_pgm_token(in));
    if (w <= 0 || h <= 0 || maxval != 65535) throw FormatError("unsupported PGM header in " + pgm_path.string());

    DepthImage image;
    image.width = static_cast<int>(w);
    image.height = static_cast<int>(h);
    std::vector<unsigned char> bytes(static_cast<std::size_t>(w * h * 2));
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size())
        throw FormatError("truncated PGM payload in " + pgm_path.string());
    image.depth.resize(static_cast<std::size_t>(w * h));
    for (std::size_t i = 0; i < image.depth.size(); ++i)
        image.depth[i] = ((bytes[2 * i] << 8) | bytes[2 * i + 1]) / 100.0;

    std::ifstream side(sidecar_path(pgm_path));
    if (!side) throw IoError("missing sidecar for " + pgm_path.string());
    std::string line;
    std::getline(side, line);
    std::map<std::string, std::string, std::less<>> kv;
    for (auto token : split_whitespace(line)) {
        const auto eq = token.find('=');
        if (eq == std::string_view::npos) throw FormatError("malformed sidecar token '" + std::string(token) + "'");
        kv[std::string(token.substr(0, eq))] = std::string(token.substr(eq + 1));
    }
    auto get = [&](std::string_view key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) throw FormatError("sidecar lacks '" + std::string(key) + "' for " + pgm_path.string());
        return it->second;
    };
    image.ids = {static_cast<int>(parse_int(get("patient"))), static_cast<int>(parse_int(get("scan"))),
                 static_cast<int>(parse_int(get("pose")))};
    image.stage = parse_stage(get("stage"));
    const auto target = split(get("target"), ',');
    if (target.size() != 3) throw FormatError("sidecar target must have 3 components");
    image.pose = pose_camera(parse_real(get("pitch")), parse_real(get("roll")), parse_real(get("yaw")),
                             {parse_real(target[0]), parse_real(target[1]), parse_real(target[2])},
                             parse_real(get("sc")), image.width, image.height, parse_real(get("u0")),
                             parse_real(get("v0")), parse_real(get("distance")));
    return image;
}

}  // namespace ctface
