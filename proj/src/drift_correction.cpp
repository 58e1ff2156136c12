#include "scalevo/drift_correction.hpp"

#include "scalevo/errors.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <ostream>

namespace scalevo {

void DriftMonitor::validate() const {
    if (!(propagated_scale > 0.0) || !(threshold > 0.0)) {
        throw Error(ErrorKind::Config, "drift monitor needs positive scale and threshold");
    }
}

double drift_ratio(const ScaleEstimate& estimate, double s_propagated) {
    if (!estimate.valid || !(estimate.s > 0.0) || !std::isfinite(estimate.s)) {
        throw Error(ErrorKind::NoRatio, "no valid scale estimate for this frame");
    }
    if (!(s_propagated > 0.0)) {
        throw Error(ErrorKind::InvalidInput, "propagated scale must be positive");
    }
    return estimate.s / s_propagated;
}

bool correction_trigger(double lambda, const DriftMonitor& monitor) {
    return std::abs(lambda - 1.0) > monitor.threshold;
}

Pose rescale_about_anchor(const Pose& pose, const Pose& anchor, double s) {
    if (s == 1.0) return pose;
    // In anchor coordinates the pose translation is R_a^T (t - t_a); scaling
    // it by s and mapping back gives t_a + s (t - t_a). Rotations are
    // untouched.
    return {pose.R, anchor.t + s * (pose.t - anchor.t)};
}

LocalMap rescale_local_map(const LocalMap& map, double s) {
    if (!(s > 0.0) || !std::isfinite(s)) {
        throw Error(ErrorKind::InvalidInput, "rescale factor must be positive");
    }
    LocalMap out = map;
    if (s == 1.0) return out;
    const Pose& anchor = map.anchor.pose_world;
    for (auto& kf : out.keyframes) kf.pose_world = rescale_about_anchor(kf.pose_world, anchor, s);
    for (auto& p : out.points) p.position = anchor.t + s * (p.position - anchor.t);
    return out;
}

void CorrectionConfig::validate() const {
    monitor.validate();
    gate.validate();
    noise.validate();
    if (!(h_true > 0.0) || keyframe_interval < 1 || local_window < 1 ||
        std::abs(prior_n.norm() - 1.0) > 1e-6) {
        throw Error(ErrorKind::Config, "invalid correction loop configuration");
    }
}

std::optional<ScaleEstimate> gated_frame_estimate(std::span<const Correspondence> corrs_all,
                                                  std::span<const Correspondence> corrs_roi,
                                                  const CameraIntrinsics& K, double h_true,
                                                  const Vec3& prior_n,
                                                  const EstimatorConfig& estimator,
                                                  const GateConfig& gate) {
    // Speed is checked by the loop, so it is disabled here.
    GateConfig normal_only = gate;
    normal_only.min_speed = 0.0;
    try {
        const auto geo = fit_frame_pair(corrs_all, corrs_roi, K, estimator);
        SparseDiagnostics diag;
        ScaleEstimate est = scale_by_sparse_optimization(geo, K, h_true, estimator, &diag);
        if (!gate_plane_estimate(diag.init.plane, prior_n, 0.0, normal_only).accepted() ||
            !gate_plane_estimate(*est.plane, prior_n, 0.0, normal_only).accepted()) {
            return std::nullopt;
        }
        return est;
    } catch (const Error&) {
        return std::nullopt;
    }
}

std::string_view to_string(TriggerAction action) {
    return action == TriggerAction::Trigger ? "trigger" : "applied";
}

CorrectionResult run_correction_loop(std::span<const Pose> vo_trajectory,
                                     std::span<const FrameMeasurement> measurements,
                                     const CorrectionConfig& config,
                                     std::span<const std::vector<Point3>> points,
                                     const LocalBaHook& local_ba) {
    config.validate();
    const std::size_t n = vo_trajectory.size();
    if (measurements.size() != n || (!points.empty() && points.size() != n)) {
        throw Error(ErrorKind::InvalidInput,
                    "measurements and points must align with the trajectory");
    }
    CorrectionResult result;
    if (n == 0) return result;
    result.trajectory.resize(n);
    result.trace.resize(n);
    auto& traj = result.trajectory;

    // Frames after the latest correction map raw positions through
    // t -> seg_corr + gain (t - seg_raw).
    bool corrected = false;
    double gain = 1.0;
    Vec3 seg_raw = Vec3::Zero(), seg_corr = Vec3::Zero();
    auto map_position = [&](const Vec3& raw) {
        return corrected ? Vec3(seg_corr + gain * (raw - seg_raw)) : raw;
    };

    std::optional<KalmanState> filter;
    double s_prop = config.monitor.propagated_scale;
    bool scale_known = !config.init_scale_from_first;
    std::optional<std::pair<std::int64_t, double>> pending;
    std::deque<std::int64_t> window;

    auto add_points = [&](std::size_t k) {
        if (points.empty()) return;
        for (const auto& p : points[k])
            result.points.push_back({map_position(p), static_cast<std::int64_t>(k)});
    };

    traj[0] = vo_trajectory[0];
    add_points(0);
    window.push_back(0);

    for (std::size_t k = 1; k < n; ++k) {
        const auto id = static_cast<std::int64_t>(k);
        traj[k] = {vo_trajectory[k].R, map_position(vo_trajectory[k].t)};
        add_points(k);
        const Pose motion = traj[k].inverse() * traj[k - 1];
        if (filter) filter = kf_predict(*filter, motion);

        FrameTrace& trace = result.trace[k];
        trace.lambda = std::numeric_limits<double>::quiet_NaN();
        const auto& meas = measurements[k].plane;
        const double step = motion.t.norm();
        if (meas && meas->valid(1e-6) && step > 0.0) {
            const PlaneEstimate plane{meas->n, meas->h * step};
            const GateDecision gate = gate_plane_estimate(plane, config.prior_n, step * s_prop,
                                                          config.gate);
            trace.gate = gate.reason;
            if (gate.accepted()) {
                trace.measured = true;
                try {
                    filter = filter ? kf_update(*filter, {plane.n.x(), plane.n.z(), plane.h})
                                    : KalmanState::initial(plane, config.noise);
                } catch (const Error&) {
                    trace.measured = false;
                }
            }
        }
        if (filter && filter->x(3) > 0.0) {
            const double s_filtered = config.h_true / filter->x(3);
            if (!scale_known && trace.measured) {
                s_prop = s_filtered;
                scale_known = true;
            }
            if (scale_known) {
                trace.filtered_scale = s_filtered;
                trace.lambda = s_filtered / s_prop;
                if (trace.measured && !pending &&
                    correction_trigger(trace.lambda, config.monitor)) {
                    pending.emplace(id, trace.lambda);
                    result.log.push_back({id, trace.lambda, TriggerAction::Trigger});
                }
            }
        }

        if (k % static_cast<std::size_t>(config.keyframe_interval) != 0) continue;

        if (pending && pending->first < id) {
            const double lambda = pending->second;
            LocalMap map;
            map.anchor = {id, traj[k]};
            const std::size_t older = std::min(window.size(), config.local_window - 1);
            for (std::size_t i = window.size() - older; i < window.size(); ++i) {
                const auto kid = static_cast<std::size_t>(window[i]);
                map.keyframes.push_back({window[i], traj[kid]});
            }
            const std::int64_t first_id = map.keyframes.empty() ? id : map.keyframes.front().id;
            std::vector<std::size_t> point_index;
            for (std::size_t i = 0; i < result.points.size(); ++i) {
                if (result.points[i].owner >= first_id) {
                    point_index.push_back(i);
                    map.points.push_back(result.points[i]);
                }
            }
            map = rescale_local_map(map, lambda);
            if (local_ba) local_ba(map);

            // Frames between keyframes follow the same transform.
            for (auto j = static_cast<std::size_t>(first_id); j < k; ++j)
                traj[j] = rescale_about_anchor(traj[j], traj[k], lambda);
            for (const auto& kf : map.keyframes) traj[static_cast<std::size_t>(kf.id)] = kf.pose_world;
            traj[k] = map.anchor.pose_world;
            for (std::size_t i = 0; i < point_index.size(); ++i)
                result.points[point_index[i]] = map.points[i];

            gain *= lambda;
            seg_raw = vo_trajectory[k].t;
            seg_corr = traj[k].t;
            corrected = true;
            // Map distances grew by lambda, so the plane distance in map
            // units grows with them. The propagated scale keeps its value:
            // it is the triggering estimate expressed in the new units.
            if (filter) filter = kf_rescale_height(*filter, lambda);
            result.log.push_back({id, lambda, TriggerAction::Applied});
            pending.reset();
        }
        window.push_back(id);
        while (window.size() > config.local_window) window.pop_front();
    }
    result.final_gain = gain;
    return result;
}

void write_trigger_log(std::ostream& os, std::span<const TriggerRecord> log) {
    const auto flags = os.flags();
    const auto precision = os.precision(9);
    os << "frame_id,lambda,action\n";
    for (const auto& r : log) os << r.frame_id << ',' << r.lambda << ',' << to_string(r.action) << '\n';
    os.precision(precision);
    os.flags(flags);
}

}  // namespace scalevo
