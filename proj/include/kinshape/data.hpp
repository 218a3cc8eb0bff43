#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kinshape/appearance.hpp"
#include "kinshape/errors.hpp"
#include "kinshape/face_template.hpp"
#include "kinshape/grassmann.hpp"
#include "kinshape/matrix.hpp"

namespace kinshape {

enum class PairLabel : int { non_kin = 0, kin = 1 };

// One labeled comparison pair. Family ids are bookkeeping for fold
// assignment (kept family-disjoint when available) and are -1 for data
// loaded from manifests, which carry folds explicitly instead.
struct PairSample {
    LandmarkShape shape_a;
    LandmarkShape shape_b;
    AppearanceVector appearance_a;
    AppearanceVector appearance_b;
    PairLabel label = PairLabel::non_kin;
    std::string relation_tag;
    int fold = -1;
    long family_a = -1;
    long family_b = -1;
};

// Nuisance-transform ranges for the synthetic generator. Raw random draws
// are made independently of these bounds and scaled into them at use, so
// widening a range changes only that transform, not the underlying faces.
struct AffineRanges {
    double rotation_max = 3.14159265358979323846; // radians, +/-
    double scale_min = 0.7;
    double scale_max = 1.3;
    double shear_max = 0.2;      // +/-
    double translation_max = 0.5; // +/- per axis; applied only when centering is on
};

struct SynthConfig {
    std::size_t family_count = 400; // must be even: families are paired into units
    Matrix template_points = face_template_points();
    double family_deformation_scale = 0.25; // sigma_f: offset shared by a family
    double child_noise_scale = 0.05;        // sigma_c: child's deviation from parent
    AffineRanges affine;
    std::size_t appearance_dim = 32;
    double appearance_heritability = 0.85; // rho: kin appearance correlation
    std::uint64_t seed = 1;
    Centering centering = Centering::on;
};

namespace detail {

inline void validate(const SynthConfig& c) {
    if (c.family_count < 2 || c.family_count % 2 != 0)
        throw config_error("family_count must be an even number >= 2");
    if (!(c.family_deformation_scale > 0.0))
        throw config_error("family_deformation_scale must be positive");
    if (c.child_noise_scale < 0.0 || c.child_noise_scale > c.family_deformation_scale)
        throw config_error("child_noise_scale must lie in [0, family_deformation_scale]");
    if (!(c.affine.scale_min > 0.0) || c.affine.scale_max < c.affine.scale_min)
        throw config_error("scale range must satisfy 0 < scale_min <= scale_max");
    if (c.affine.rotation_max < 0.0 || c.affine.shear_max < 0.0 || c.affine.translation_max < 0.0)
        throw config_error("affine ranges must be nonnegative");
    if (c.appearance_heritability < 0.0 || c.appearance_heritability > 1.0)
        throw config_error("appearance_heritability must lie in [0, 1]");
    if (c.appearance_dim < 1)
        throw config_error("appearance_dim must be >= 1");
    if (c.template_points.cols() != 2 || c.template_points.rows() < 3)
        throw config_error("template must be an m x 2 matrix with m >= 3");
}

// Deterministic per-image draw: all raw random values are consumed in a
// fixed order regardless of which transforms are enabled.
struct ImageDraws {
    double rot, shear, sx, sy, tx, ty;
};

inline ImageDraws draw_image_raws(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ImageDraws d{};
    d.rot = sym(rng);
    d.shear = sym(rng);
    d.sx = unit(rng);
    d.sy = unit(rng);
    d.tx = sym(rng);
    d.ty = sym(rng);
    return d;
}

inline Matrix apply_nuisance(const Matrix& pts, const ImageDraws& d, const AffineRanges& r,
                             Centering centering) {
    const double theta = d.rot * r.rotation_max;
    const double h = d.shear * r.shear_max;
    const double sx = r.scale_min + d.sx * (r.scale_max - r.scale_min);
    const double sy = r.scale_min + d.sy * (r.scale_max - r.scale_min);
    const double c = std::cos(theta), s = std::sin(theta);
    // a = rotation * shear * scale; full rank since every factor is.
    const Matrix a = matmul(matmul(Matrix::from_rows({{c, -s}, {s, c}}),
                                   Matrix::from_rows({{1.0, h}, {0.0, 1.0}})),
                            Matrix::from_rows({{sx, 0.0}, {0.0, sy}}));
    Matrix out = matmul(pts, a);
    if (centering == Centering::on) {
        const double tx = d.tx * r.translation_max;
        const double ty = d.ty * r.translation_max;
        for (std::size_t i = 0; i < out.rows(); ++i) {
            out(i, 0) += tx;
            out(i, 1) += ty;
        }
    }
    return out;
}

inline int parse_count_header(const std::string& line, char key, const std::string& path) {
    if (line.size() < 3 || line[0] != key || line[1] != '=')
        throw format_error(path + ":1: expected header '" + std::string(1, key) + "=<count>'");
    try {
        const int n = std::stoi(line.substr(2));
        if (n < 1) throw std::invalid_argument("");
        return n;
    } catch (const std::exception&) {
        throw format_error(path + ":1: invalid count in header");
    }
}

inline std::pair<double, double> parse_xy(const std::string& line, const std::string& path,
                                          std::size_t lineno) {
    const auto comma = line.find(',');
    if (comma == std::string::npos)
        throw format_error(path + ":" + std::to_string(lineno) + ": expected 'x,y'");
    try {
        std::size_t used = 0;
        const double x = std::stod(line.substr(0, comma), &used);
        const double y = std::stod(line.substr(comma + 1));
        (void)used;
        return {x, y};
    } catch (const std::exception&) {
        throw format_error(path + ":" + std::to_string(lineno) + ": malformed number");
    }
}

constexpr char landmark_magic[4] = {'K', 'S', 'L', 'M'};

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Landmark files. Text variant: header "m=<count>" then one "x,y" line per
// landmark ("%.17g", round-trip exact). Binary variant: magic "KSLM",
// little-endian uint32 count, then 2m little-endian doubles row-major.
// ---------------------------------------------------------------------------

inline void save_landmarks_text(const std::string& path, const LandmarkShape& s) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << "m=" << s.landmark_count() << "\n";
    for (std::size_t i = 0; i < s.landmark_count(); ++i)
        out << detail::format_double(s.points(i, 0)) << ',' << detail::format_double(s.points(i, 1))
            << "\n";
    if (!out) throw io_error("write failed: " + path);
}

inline void save_landmarks_binary(const std::string& path, const LandmarkShape& s) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    out.write(detail::landmark_magic, 4);
    const std::uint32_t m = static_cast<std::uint32_t>(s.landmark_count());
    out.write(reinterpret_cast<const char*>(&m), sizeof(m));
    for (std::size_t i = 0; i < s.landmark_count(); ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            const double v = s.points(i, j);
            out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
    if (!out) throw io_error("write failed: " + path);
}

// Reads either variant, distinguished by the binary magic.
inline LandmarkShape load_landmarks(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open: " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() == 4 && std::memcmp(magic, detail::landmark_magic, 4) == 0) {
        std::uint32_t m = 0;
        in.read(reinterpret_cast<char*>(&m), sizeof(m));
        if (!in || m < 1) throw format_error(path + ": truncated or empty binary landmark file");
        Matrix pts(m, 2);
        for (std::uint32_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < 2; ++j) {
                double v = 0.0;
                in.read(reinterpret_cast<char*>(&v), sizeof(v));
                if (!in) throw format_error(path + ": truncated binary landmark file");
                pts(i, j) = v;
            }
        return LandmarkShape(std::move(pts));
    }

    in.clear();
    in.seekg(0);
    std::string line;
    if (!std::getline(in, line)) throw format_error(path + ":1: empty file");
    const int m = detail::parse_count_header(line, 'm', path);
    Matrix pts(static_cast<std::size_t>(m), 2);
    for (int i = 0; i < m; ++i) {
        if (!std::getline(in, line))
            throw format_error(path + ":" + std::to_string(i + 2) + ": expected " + std::to_string(m) +
                               " landmark lines");
        const auto [x, y] = detail::parse_xy(line, path, static_cast<std::size_t>(i) + 2);
        pts(static_cast<std::size_t>(i), 0) = x;
        pts(static_cast<std::size_t>(i), 1) = y;
    }
    return LandmarkShape(std::move(pts));
}

// ---------------------------------------------------------------------------
// Appearance files: header "d=<count>" then one real per line.
// ---------------------------------------------------------------------------

inline void save_appearance(const std::string& path, const AppearanceVector& a) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << "d=" << a.dim() << "\n";
    for (double v : a.values) out << detail::format_double(v) << "\n";
    if (!out) throw io_error("write failed: " + path);
}

inline AppearanceVector load_appearance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw format_error(path + ":1: empty file");
    const int d = detail::parse_count_header(line, 'd', path);
    std::vector<double> v(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        if (!std::getline(in, line))
            throw format_error(path + ":" + std::to_string(i + 2) + ": expected " + std::to_string(d) +
                               " value lines");
        try {
            v[static_cast<std::size_t>(i)] = std::stod(line);
        } catch (const std::exception&) {
            throw format_error(path + ":" + std::to_string(i + 2) + ": malformed number");
        }
    }
    return AppearanceVector(std::move(v));
}

// ---------------------------------------------------------------------------
// Synthetic kinship pairs. Families are generated in units of two; each unit
// yields two kin pairs (parent, own child) and two non-kin pairs (parent,
// other family's child), so labels are exactly balanced and fold assignment
// can keep families disjoint by placing whole units.
// ---------------------------------------------------------------------------

inline std::vector<PairSample> generate_synthetic(const SynthConfig& config) {
    detail::validate(config);
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const Matrix& tpl = config.template_points;
    const std::size_t m = tpl.rows();
    const std::size_t d = config.appearance_dim;
    const double sf = config.family_deformation_scale;
    const double sc = config.child_noise_scale;
    const double rho = config.appearance_heritability;
    const double rho_noise = std::sqrt(std::max(0.0, 1.0 - rho * rho));

    struct Family {
        Matrix parent_pts;
        Matrix child_pts;
        std::vector<double> parent_app;
        std::vector<double> child_app;
    };

    std::vector<Family> families;
    families.reserve(config.family_count);
    for (std::size_t f = 0; f < config.family_count; ++f) {
        Matrix parent = tpl;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                parent(i, j) += sf * gauss(rng);
        Matrix child = parent;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                child(i, j) += sc * gauss(rng);

        std::vector<double> parent_app(d), child_app(d);
        for (std::size_t i = 0; i < d; ++i) parent_app[i] = gauss(rng);
        for (std::size_t i = 0; i < d; ++i) child_app[i] = rho * parent_app[i] + rho_noise * gauss(rng);

        const detail::ImageDraws pd = detail::draw_image_raws(rng);
        const detail::ImageDraws cd = detail::draw_image_raws(rng);
        parent = detail::apply_nuisance(parent, pd, config.affine, config.centering);
        child = detail::apply_nuisance(child, cd, config.affine, config.centering);

        families.push_back(Family{std::move(parent), std::move(child), std::move(parent_app),
                                  std::move(child_app)});
    }

    std::vector<PairSample> samples;
    samples.reserve(config.family_count * 2);
    const auto make_pair = [&](std::size_t fa, std::size_t fb, PairLabel label) {
        const Family& a = families[fa];
        const Family& b = families[fb];
        samples.push_back(PairSample{LandmarkShape(a.parent_pts), LandmarkShape(b.child_pts),
                                     AppearanceVector(a.parent_app), AppearanceVector(b.child_app),
                                     label, "synthetic", -1, static_cast<long>(fa),
                                     static_cast<long>(fb)});
    };
    for (std::size_t u = 0; u + 1 < config.family_count; u += 2) {
        make_pair(u, u, PairLabel::kin);
        make_pair(u + 1, u + 1, PairLabel::kin);
        make_pair(u, u + 1, PairLabel::non_kin);
        make_pair(u + 1, u, PairLabel::non_kin);
    }
    return samples;
}

// ---------------------------------------------------------------------------
// Fold assignment. With family ids present (synthetic data), whole family
// groups go to one fold so no family straddles folds; group placement is a
// seeded greedy balance. Without family ids, a seeded stratified round-robin
// balances sizes and labels. Family disjointness takes precedence over the
// size-balance goal when the two conflict (ragged family groups).
// ---------------------------------------------------------------------------

inline std::vector<PairSample> assign_folds(std::vector<PairSample> samples, std::size_t k,
                                            std::uint64_t seed) {
    if (k < 2) throw config_error("fold count must be >= 2");
    if (samples.size() < k)
        throw data_error("need at least as many samples as folds, got " +
                         std::to_string(samples.size()) + " samples for k=" + std::to_string(k));

    std::mt19937_64 rng(seed);
    const bool has_families =
        std::any_of(samples.begin(), samples.end(),
                    [](const PairSample& s) { return s.family_a >= 0 || s.family_b >= 0; });

    if (has_families) {
        // Union families connected by any pair, then place connected groups.
        std::map<long, long> parent;
        const auto find = [&](long x) {
            long r = x;
            while (parent[r] != r) r = parent[r];
            while (parent[x] != r) x = std::exchange(parent[x], r);
            return r;
        };
        for (const PairSample& s : samples) {
            for (long f : {s.family_a, s.family_b})
                if (f >= 0 && !parent.count(f)) parent[f] = f;
            if (s.family_a >= 0 && s.family_b >= 0) {
                const long ra = find(s.family_a), rb = find(s.family_b);
                if (ra != rb) parent[ra] = rb;
            }
        }
        std::map<long, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const PairSample& s = samples[i];
            // Samples without any family id form singleton groups (negative
            // keys cannot collide with union-find roots, which are ids >= 0).
            const long key = s.family_a >= 0   ? find(s.family_a)
                             : s.family_b >= 0 ? find(s.family_b)
                                               : -static_cast<long>(i) - 1;
            groups[key].push_back(i);
        }
        std::vector<std::vector<std::size_t>> group_list;
        group_list.reserve(groups.size());
        for (auto& [key, idx] : groups) group_list.push_back(std::move(idx));
        std::shuffle(group_list.begin(), group_list.end(), rng);

        std::vector<std::size_t> fold_sizes(k, 0);
        for (const auto& g : group_list) {
            std::size_t arg = 0;
            for (std::size_t f = 1; f < k; ++f)
                if (fold_sizes[f] < fold_sizes[arg]) arg = f;
            for (std::size_t i : g) samples[i].fold = static_cast<int>(arg);
            fold_sizes[arg] += g.size();
        }
        return samples;
    }

    std::vector<std::size_t> kin_idx, non_idx;
    for (std::size_t i = 0; i < samples.size(); ++i)
        (samples[i].label == PairLabel::kin ? kin_idx : non_idx).push_back(i);
    std::shuffle(kin_idx.begin(), kin_idx.end(), rng);
    std::shuffle(non_idx.begin(), non_idx.end(), rng);
    std::size_t counter = 0;
    for (std::size_t i : kin_idx) samples[i].fold = static_cast<int>(counter++ % k);
    for (std::size_t i : non_idx) samples[i].fold = static_cast<int>(counter++ % k);
    return samples;
}

// ---------------------------------------------------------------------------
// Pair manifests: one record per line,
//   shape_a,shape_b,appearance_a,appearance_b,label,relation_tag,fold
// with paths relative to the manifest's directory, label "kin"/"non-kin",
// empty appearance paths meaning "absent" (loaded as a 1-dim zero vector),
// and fold -1 meaning unassigned. Lines starting with '#' are comments.
// ---------------------------------------------------------------------------

inline const char* to_string(PairLabel label) {
    return label == PairLabel::kin ? "kin" : "non-kin";
}

inline PairLabel parse_label(const std::string& text, const std::string& context) {
    if (text == "kin") return PairLabel::kin;
    if (text == "non-kin") return PairLabel::non_kin;
    throw format_error(context + ": unknown label '" + text + "' (want kin|non-kin)");
}

// Writes the samples and their landmark/appearance files into `dir` and
// returns the manifest path. Shapes use the text landmark format.
inline std::string write_dataset(const std::string& dir, const std::vector<PairSample>& samples) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path root(dir);
    std::ofstream manifest(root / "manifest.csv", std::ios::trunc);
    if (!manifest) throw io_error("cannot open for writing: " + (root / "manifest.csv").string());
    manifest << "# shape_a,shape_b,appearance_a,appearance_b,label,relation_tag,fold\n";
    char name[64];
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const PairSample& s = samples[i];
        std::snprintf(name, sizeof(name), "p%05zu", i);
        const std::string base(name);
        const std::string sa = base + "_a.lmk", sb = base + "_b.lmk";
        const std::string aa = base + "_a.app", ab = base + "_b.app";
        save_landmarks_text((root / sa).string(), s.shape_a);
        save_landmarks_text((root / sb).string(), s.shape_b);
        save_appearance((root / aa).string(), s.appearance_a);
        save_appearance((root / ab).string(), s.appearance_b);
        manifest << sa << ',' << sb << ',' << aa << ',' << ab << ',' << to_string(s.label) << ','
                 << s.relation_tag << ',' << s.fold << "\n";
    }
    if (!manifest) throw io_error("write failed: " + (root / "manifest.csv").string());
    return (root / "manifest.csv").string();
}

inline std::vector<PairSample> load_pairs(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream in(manifest_path);
    if (!in) throw io_error("cannot open: " + manifest_path);
    const fs::path root = fs::path(manifest_path).parent_path();

    std::vector<PairSample> samples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (!line.empty() && line.back() == ',') fields.push_back("");
        const std::string context = manifest_path + ":" + std::to_string(lineno);
        if (fields.size() != 7)
            throw format_error(context + ": expected 7 comma-separated fields, got " +
                               std::to_string(fields.size()));

        LandmarkShape shape_a = load_landmarks((root / fields[0]).string());
        LandmarkShape shape_b = load_landmarks((root / fields[1]).string());
        AppearanceVector app_a = fields[2].empty()
                                     ? AppearanceVector(std::vector<double>{0.0})
                                     : load_appearance((root / fields[2]).string());
        AppearanceVector app_b = fields[3].empty()
                                     ? AppearanceVector(std::vector<double>{0.0})
                                     : load_appearance((root / fields[3]).string());
        const PairLabel label = parse_label(fields[4], context);
        int fold = -1;
        try {
            fold = fields[6].empty() ? -1 : std::stoi(fields[6]);
        } catch (const std::exception&) {
            throw format_error(context + ": malformed fold index '" + fields[6] + "'");
        }
        samples.push_back(PairSample{std::move(shape_a), std::move(shape_b), std::move(app_a),
                                     std::move(app_b), label, fields[5], fold, -1, -1});
    }
    if (samples.empty()) throw data_error(manifest_path + ": no pair records");
    return samples;
}

} // namespace kinshape
