#include "scalevo/eval_io.hpp"

#include "scalevo/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string_view>

namespace scalevo {
namespace {

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& msg) {
    throw Error(ErrorKind::Parse, source + ":" + std::to_string(line) + ": " + msg);
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::optional<double> to_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::optional<std::int64_t> to_int(std::string_view s) {
    s = trim(s);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// Rounds to the nine significant digits used by every writer.
double round9(double v) {
    if (!std::isfinite(v)) return v;
    return std::strtod(fmt9(v).c_str(), nullptr);
}

void expect_header(std::istream& in, const std::string& source, std::string_view header) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != header) {
        parse_fail(source, 1, "expected header '" + std::string(header) + "'");
    }
}

double arc_between(const std::vector<double>& dist, std::size_t a, std::size_t b) {
    return dist[b] - dist[a];
}

}  // namespace

Trajectory parse_kitti_poses(std::istream& in, const std::string& source,
                             double rotation_tolerance) {
    Trajectory traj;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto content = trim(line);
        if (content.empty()) continue;
        std::vector<double> values;
        std::size_t pos = 0;
        while (pos < content.size()) {
            const auto b = content.find_first_not_of(" \t", pos);
            if (b == std::string_view::npos) break;
            auto e = content.find_first_of(" \t", b);
            if (e == std::string_view::npos) e = content.size();
            const auto v = to_double(content.substr(b, e - b));
            if (!v) parse_fail(source, lineno, "not a number: '" + std::string(content.substr(b, e - b)) + "'");
            if (!std::isfinite(*v)) parse_fail(source, lineno, "non-finite value");
            values.push_back(*v);
            pos = e;
        }
        if (values.size() != 12) {
            parse_fail(source, lineno, "expected 12 values, found " + std::to_string(values.size()));
        }
        Pose p;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) p.R(r, c) = values[static_cast<std::size_t>(4 * r + c)];
            p.t(r) = values[static_cast<std::size_t>(4 * r + 3)];
        }
        if (!is_rotation(p.R, rotation_tolerance)) parse_fail(source, lineno, "R is not a rotation");
        traj.poses.push_back(p);
    }
    return traj;
}

Trajectory read_kitti_poses(const std::filesystem::path& path, double rotation_tolerance) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Parse, "cannot open " + path.string());
    return parse_kitti_poses(in, path.string(), rotation_tolerance);
}

void write_kitti_poses(std::ostream& out, const Trajectory& traj) {
    for (const auto& p : traj.poses) {
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) out << (r || c ? " " : "") << fmt9(p.R(r, c));
            out << ' ' << fmt9(p.t(r));
        }
        out << '\n';
    }
}

void write_kitti_poses(const std::filesystem::path& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Parse, "cannot write " + path.string());
    write_kitti_poses(out, traj);
}

std::vector<double> ground_truth_scales(const Trajectory& traj) {
    if (traj.size() < 2) {
        throw Error(ErrorKind::InvalidInput, "ground-truth scales need at least two poses");
    }
    std::vector<double> out;
    out.reserve(traj.size() - 1);
    for (std::size_t k = 1; k < traj.size(); ++k)
        out.push_back((traj.poses[k].t - traj.poses[k - 1].t).norm());
    return out;
}

ScaleErrorStats scale_error_stats(std::span<const std::optional<double>> estimates,
                                  std::span<const double> gt_scales) {
    if (estimates.size() != gt_scales.size()) {
        throw Error(ErrorKind::Alignment, "estimates and ground truth differ in length (" +
                                              std::to_string(estimates.size()) + " vs " +
                                              std::to_string(gt_scales.size()) + ")");
    }
    ScaleErrorStats st;
    st.rel_errors.assign(estimates.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<double> used;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        if (!estimates[i] || !std::isfinite(*estimates[i]) || !(gt_scales[i] > 0.0)) {
            ++st.skipped;
            continue;
        }
        st.rel_errors[i] = std::abs(*estimates[i] - gt_scales[i]) / gt_scales[i];
        used.push_back(st.rel_errors[i]);
    }
    st.used = used.size();
    if (used.empty()) return st;
    double sum = 0.0;
    for (double e : used) sum += e;
    st.mean = sum / static_cast<double>(used.size());
    double var = 0.0;
    for (double e : used) var += (e - st.mean) * (e - st.mean);
    st.stddev = std::sqrt(var / static_cast<double>(used.size()));
    std::sort(used.begin(), used.end());
    const std::size_t mid = used.size() / 2;
    st.median = used.size() % 2 ? used[mid] : 0.5 * (used[mid - 1] + used[mid]);
    return st;
}

SegmentReport kitti_segment_errors(const Trajectory& est, const Trajectory& gt,
                                   std::span<const double> lengths) {
    if (est.size() != gt.size()) {
        throw Error(ErrorKind::Alignment, "trajectories differ in length");
    }
    std::vector<double> dist(gt.size(), 0.0);
    for (std::size_t i = 1; i < gt.size(); ++i)
        dist[i] = dist[i - 1] + (gt.poses[i].t - gt.poses[i - 1].t).norm();

    SegmentReport rep;
    for (const double L : lengths) {
        if (!(L > 0.0)) throw Error(ErrorKind::InvalidInput, "segment lengths must be positive");
        SegmentSummary sum;
        sum.length = L;
        std::size_t last = 0;
        for (std::size_t first = 0; first < gt.size(); ++first) {
            // dist is nondecreasing, so the end frame only moves forward.
            last = std::max(last, first);
            while (last < gt.size() && arc_between(dist, first, last) < L) ++last;
            if (last >= gt.size()) break;
            const Pose d_gt = gt.poses[first].inverse() * gt.poses[last];
            const Pose d_est = est.poses[first].inverse() * est.poses[last];
            const Pose err = d_gt.inverse() * d_est;
            SegmentError se;
            se.first = first;
            se.last = last;
            se.length = L;
            se.arc_length = arc_between(dist, first, last);
            se.t_err_pct = 100.0 * err.t.norm() / se.arc_length;
            se.r_err_deg_per_m = rotation_angle(err.R) * 180.0 / std::numbers::pi / se.arc_length;
            sum.t_err_pct += se.t_err_pct;
            sum.r_err_deg_per_m += se.r_err_deg_per_m;
            ++sum.count;
            rep.segments.push_back(se);
        }
        if (sum.count) {
            rep.t_err_pct += sum.t_err_pct;
            rep.r_err_deg_per_m += sum.r_err_deg_per_m;
            sum.t_err_pct /= static_cast<double>(sum.count);
            sum.r_err_deg_per_m /= static_cast<double>(sum.count);
        }
        rep.count += sum.count;
        rep.per_length.push_back(sum);
    }
    if (rep.count) {
        rep.t_err_pct /= static_cast<double>(rep.count);
        rep.r_err_deg_per_m /= static_cast<double>(rep.count);
    }
    return rep;
}

std::vector<FrameCorrespondences> parse_correspondences_csv(std::istream& in,
                                                            const std::string& source) {
    expect_header(in, source, "frame,x1,y1,x2,y2,roi");
    std::map<std::int64_t, FrameCorrespondences> frames;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 6) parse_fail(source, lineno, "expected 6 fields");
        const auto frame = to_int(f[0]);
        const auto roi = to_int(f[5]);
        std::array<double, 4> v{};
        for (std::size_t i = 0; i < 4; ++i) {
            const auto d = to_double(f[i + 1]);
            if (!d || !std::isfinite(*d)) parse_fail(source, lineno, "bad coordinate");
            v[i] = *d;
        }
        if (!frame) parse_fail(source, lineno, "bad frame id");
        if (!roi || (*roi != 0 && *roi != 1)) parse_fail(source, lineno, "roi must be 0 or 1");
        auto& fc = frames[*frame];
        fc.frame = *frame;
        const Correspondence c{{v[0], v[1]}, {v[2], v[3]}};
        fc.all.push_back(c);
        if (*roi == 1) fc.roi.push_back(c);
    }
    std::vector<FrameCorrespondences> out;
    out.reserve(frames.size());
    for (auto& [id, fc] : frames) out.push_back(std::move(fc));
    return out;
}

void write_correspondences_csv(std::ostream& out, std::span<const FrameCorrespondences> frames) {
    out << "frame,x1,y1,x2,y2,roi\n";
    for (const auto& fc : frames) {
        // ROI rows first; each correspondence is written once.
        auto row = [&](const Correspondence& c, int roi) {
            out << fc.frame << ',' << fmt9(c.x1.x()) << ',' << fmt9(c.x1.y()) << ','
                << fmt9(c.x2.x()) << ',' << fmt9(c.x2.y()) << ',' << roi << '\n';
        };
        for (const auto& c : fc.roi) row(c, 1);
        for (const auto& c : fc.all) {
            const bool is_roi = std::any_of(fc.roi.begin(), fc.roi.end(), [&](const auto& r) {
                return r.x1 == c.x1 && r.x2 == c.x2;
            });
            if (!is_roi) row(c, 0);
        }
    }
}

void write_scales_csv(std::ostream& out, std::span<const FrameScale> scales) {
    out << "frame,s,valid,nx,ny,nz,h\n";
    for (const auto& fs : scales) {
        out << fs.frame << ',';
        if (fs.estimate && fs.estimate->valid && fs.estimate->plane) {
            const auto& p = *fs.estimate->plane;
            out << fmt9(fs.estimate->s) << ",1," << fmt9(p.n.x()) << ',' << fmt9(p.n.y()) << ','
                << fmt9(p.n.z()) << ',' << fmt9(p.h) << '\n';
        } else {
            out << "nan,0,nan,nan,nan,nan\n";
        }
    }
}

std::vector<FrameScale> parse_scales_csv(std::istream& in, const std::string& source) {
    expect_header(in, source, "frame,s,valid,nx,ny,nz,h");
    std::vector<FrameScale> out;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 7) parse_fail(source, lineno, "expected 7 fields");
        const auto frame = to_int(f[0]);
        const auto valid = to_int(f[2]);
        if (!frame || !valid || (*valid != 0 && *valid != 1)) {
            parse_fail(source, lineno, "bad frame id or valid flag");
        }
        FrameScale fs;
        fs.frame = *frame;
        if (*valid == 1) {
            std::array<double, 5> v{};
            const std::array<std::size_t, 5> idx{1, 3, 4, 5, 6};
            for (std::size_t i = 0; i < 5; ++i) {
                const auto d = to_double(f[idx[i]]);
                if (!d || !std::isfinite(*d)) parse_fail(source, lineno, "bad value");
                v[i] = *d;
            }
            ScaleEstimate e;
            e.s = v[0];
            e.plane = PlaneEstimate{Vec3(v[1], v[2], v[3]), v[4]};
            if (!(e.s > 0.0) || !e.plane->valid(1e-6)) parse_fail(source, lineno, "invalid estimate");
            fs.estimate = e;
        }
        out.push_back(fs);
    }
    return out;
}

CorrectionConfig AppConfig::correction() const {
    CorrectionConfig c;
    c.monitor.threshold = drift_threshold;
    c.gate = gate;
    c.noise = noise;
    c.prior_n = prior_n;
    c.h_true = h_true;
    c.keyframe_interval = keyframe_interval;
    c.local_window = local_window;
    return c;
}

void AppConfig::validate() const {
    (void)camera();
    estimator.essential.validate();
    estimator.homography.validate();
    correction().validate();
    if (!(estimator.huber_r0 > 0.0) || !(estimator.consensus_mu > 0.0) ||
        estimator.refine.max_iterations < 1) {
        throw Error(ErrorKind::Config, "invalid estimator settings");
    }
}

AppConfig parse_config(std::istream& in, const std::string& source) {
    AppConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view content = line;
        if (const auto hash = content.find('#'); hash != std::string_view::npos)
            content = content.substr(0, hash);
        content = trim(content);
        if (content.empty()) continue;
        const auto eq = content.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorKind::Config, source + ":" + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key(trim(content.substr(0, eq)));
        const auto value = trim(content.substr(eq + 1));
        auto fail = [&](const std::string& why) {
            throw Error(ErrorKind::Config, source + ":" + std::to_string(lineno) + ": " + why);
        };
        auto num = [&] {
            const auto v = to_double(value);
            if (!v || !std::isfinite(*v)) fail("bad value for '" + key + "'");
            return *v;
        };
        auto integer = [&] {
            const auto v = to_int(value);
            if (!v) fail("bad integer for '" + key + "'");
            return *v;
        };

        if (key == "fx") cfg.fx = num();
        else if (key == "fy") cfg.fy = num();
        else if (key == "cx") cfg.cx = num();
        else if (key == "cy") cfg.cy = num();
        else if (key == "h_true") cfg.h_true = num();
        else if (key == "prior_nx") cfg.prior_n.x() = num();
        else if (key == "prior_ny") cfg.prior_n.y() = num();
        else if (key == "prior_nz") cfg.prior_n.z() = num();
        else if (key == "max_normal_angle") cfg.gate.max_normal_angle_deg = num();
        else if (key == "min_speed") cfg.gate.min_speed = num();
        else if (key == "essential_threshold") cfg.estimator.essential.inlier_threshold = num();
        else if (key == "homography_threshold") cfg.estimator.homography.inlier_threshold = num();
        else if (key == "ransac_max_iterations") {
            const auto v = static_cast<int>(integer());
            cfg.estimator.essential.max_iterations = v;
            cfg.estimator.homography.max_iterations = v;
        } else if (key == "ransac_confidence") {
            const double v = num();
            cfg.estimator.essential.confidence = v;
            cfg.estimator.homography.confidence = v;
        } else if (key == "huber_r0") cfg.estimator.huber_r0 = num();
        else if (key == "consensus_mu") cfg.estimator.consensus_mu = num();
        else if (key == "refine_max_iterations") cfg.estimator.refine.max_iterations = static_cast<int>(integer());
        else if (key == "q_normal") cfg.noise.q.head<3>().setConstant(num());
        else if (key == "q_height") cfg.noise.q(3) = num();
        else if (key == "r_normal") cfg.noise.r.head<2>().setConstant(num());
        else if (key == "r_height") cfg.noise.r(2) = num();
        else if (key == "p0_normal") cfg.noise.p0.head<3>().setConstant(num());
        else if (key == "p0_height") cfg.noise.p0(3) = num();
        else if (key == "drift_threshold") cfg.drift_threshold = num();
        else if (key == "keyframe_interval") cfg.keyframe_interval = static_cast<int>(integer());
        else if (key == "local_window") {
            const auto v = integer();
            if (v < 1) fail("local_window must be >= 1");
            cfg.local_window = static_cast<std::size_t>(v);
        } else if (key == "seed") {
            const auto v = integer();
            if (v < 0) fail("seed must be nonnegative");
            cfg.seed = static_cast<std::uint64_t>(v);
        } else {
            fail("unknown key '" + key + "'");
        }
    }
    const double norm = cfg.prior_n.norm();
    if (!(norm > 0.0)) throw Error(ErrorKind::Config, source + ": prior normal is zero");
    cfg.prior_n /= norm;
    apply_seed_override(cfg);
    cfg.validate();
    return cfg;
}

AppConfig read_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open " + path.string());
    return parse_config(in, path.string());
}

void apply_seed_override(AppConfig& cfg) {
    if (const char* env = std::getenv("SCALEVO_SEED"); env && *env) {
        const auto v = to_int(env);
        if (!v || *v < 0) throw Error(ErrorKind::Config, "SCALEVO_SEED must be a nonnegative integer");
        cfg.seed = static_cast<std::uint64_t>(*v);
    }
    cfg.estimator.essential.seed = cfg.seed;
    cfg.estimator.homography.seed = cfg.seed + 1;
}

std::string evaluation_report_json(const SegmentReport& segments,
                                   const std::optional<ScaleErrorStats>& scales,
                                   std::size_t frames) {
    using nlohmann::ordered_json;
    auto num = [](double v) -> ordered_json {
        if (!std::isfinite(v)) return nullptr;
        return round9(v);
    };
    ordered_json j;
    j["frames"] = frames;
    ordered_json seg;
    seg["count"] = segments.count;
    seg["t_err_pct"] = num(segments.t_err_pct);
    seg["r_err_deg_per_m"] = num(segments.r_err_deg_per_m);
    seg["per_length"] = ordered_json::array();
    for (const auto& s : segments.per_length) {
        seg["per_length"].push_back({{"length", num(s.length)},
                                     {"count", s.count},
                                     {"t_err_pct", num(s.t_err_pct)},
                                     {"r_err_deg_per_m", num(s.r_err_deg_per_m)}});
    }
    j["segments"] = seg;
    if (scales) {
        ordered_json sc;
        sc["used"] = scales->used;
        sc["skipped"] = scales->skipped;
        sc["mean_rel_err"] = num(scales->mean);
        sc["median_rel_err"] = num(scales->median);
        sc["std_rel_err"] = num(scales->stddev);
        sc["per_frame"] = ordered_json::array();
        for (double e : scales->rel_errors) sc["per_frame"].push_back(num(e));
        j["scale"] = sc;
    }
    return j.dump(2);
}

}  // namespace scalevo
