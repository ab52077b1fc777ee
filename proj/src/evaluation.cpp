#include "orbitgraph/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "orbitgraph/errors.hpp"

namespace orbitgraph {
namespace {

constexpr std::size_t kAxes = 3;

void check_pairs(std::span<const Matrix> predictions, std::span<const Matrix> truths,
                 std::size_t horizon, const char* op) {
    if (predictions.empty()) throw ContractError(std::string(op) + ": no predictions");
    if (predictions.size() != truths.size()) {
        throw DimensionError(std::string(op) + ": " + std::to_string(predictions.size()) +
                             " predictions vs " + std::to_string(truths.size()) + " truths");
    }
    for (std::size_t w = 0; w < predictions.size(); ++w) {
        if (!predictions[w].same_shape(truths[w]) ||
            predictions[w].cols() != horizon * kStateDim) {
            throw DimensionError(std::string(op) + ": window " + std::to_string(w) + " has " +
                                 predictions[w].shape_string() + " vs " +
                                 truths[w].shape_string() + " for horizon " +
                                 std::to_string(horizon));
        }
    }
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

std::vector<std::string> data_lines(const std::string& text, const std::string& header) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != header) {
        throw ParseError("csv: expected header '" + header + "'");
    }
    std::vector<std::string> lines;
    while (std::getline(in, line)) {
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

double parse_double(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("csv: line " + std::to_string(line) + ": bad number '" + s + "'");
    }
}

// Chart geometry shared by the SVG writers.
struct Panel {
    double x0, y0, width, height;
};

struct Series {
    std::vector<double> x, y;
    std::string color;
    bool dashed = false;
};

std::string fixed(double v, int digits = 2) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

void draw_panel(std::ostream& svg, const Panel& p, const std::vector<Series>& series,
                const std::string& title, const std::string& y_label) {
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto& s : series) {
        for (double v : s.x) { xmin = std::min(xmin, v); xmax = std::max(xmax, v); }
        for (double v : s.y) { ymin = std::min(ymin, v); ymax = std::max(ymax, v); }
    }
    if (!std::isfinite(xmin)) { xmin = 0.0; xmax = 1.0; ymin = 0.0; ymax = 1.0; }
    if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
    if (ymax - ymin < 1e-12) { ymin -= 0.5; ymax += 0.5; }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    auto sx = [&](double v) { return p.x0 + (v - xmin) / (xmax - xmin) * p.width; };
    auto sy = [&](double v) { return p.y0 + p.height - (v - ymin) / (ymax - ymin) * p.height; };

    svg << "<rect x=\"" << fixed(p.x0) << "\" y=\"" << fixed(p.y0) << "\" width=\""
        << fixed(p.width) << "\" height=\"" << fixed(p.height)
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    svg << "<text x=\"" << fixed(p.x0) << "\" y=\"" << fixed(p.y0 - 6) << "\">" << title
        << "</text>\n";
    svg << "<text x=\"" << fixed(p.x0 - 8) << "\" y=\"" << fixed(p.y0 + 12)
        << "\" text-anchor=\"end\">" << fixed(ymax, 3) << "</text>\n";
    svg << "<text x=\"" << fixed(p.x0 - 8) << "\" y=\"" << fixed(p.y0 + p.height)
        << "\" text-anchor=\"end\">" << fixed(ymin, 3) << "</text>\n";
    svg << "<text x=\"" << fixed(p.x0 - 8) << "\" y=\"" << fixed(p.y0 + p.height / 2)
        << "\" text-anchor=\"end\">" << y_label << "</text>\n";
    svg << "<text x=\"" << fixed(p.x0) << "\" y=\"" << fixed(p.y0 + p.height + 16) << "\">"
        << fixed(xmin, 0) << "</text>\n";
    svg << "<text x=\"" << fixed(p.x0 + p.width) << "\" y=\"" << fixed(p.y0 + p.height + 16)
        << "\" text-anchor=\"end\">" << fixed(xmax, 0) << "</text>\n";
    for (const auto& s : series) {
        svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"";
        if (s.dashed) svg << " stroke-dasharray=\"5,3\"";
        svg << " points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (i) svg << ' ';
            svg << fixed(sx(s.x[i])) << ',' << fixed(sy(s.y[i]));
        }
        svg << "\"/>\n";
    }
}

std::string svg_open(double width, double height) {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width, 0)
       << "\" height=\"" << fixed(height, 0) << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return os.str();
}

void legend(std::ostream& svg, double x, double y) {
    svg << "<line x1=\"" << fixed(x) << "\" y1=\"" << fixed(y) << "\" x2=\"" << fixed(x + 20)
        << "\" y2=\"" << fixed(y) << "\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n"
        << "<text x=\"" << fixed(x + 24) << "\" y=\"" << fixed(y + 4) << "\">truth</text>\n"
        << "<line x1=\"" << fixed(x + 70) << "\" y1=\"" << fixed(y) << "\" x2=\""
        << fixed(x + 90) << "\" y2=\"" << fixed(y)
        << "\" stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"5,3\"/>\n"
        << "<text x=\"" << fixed(x + 94) << "\" y=\"" << fixed(y + 4)
        << "\">prediction</text>\n";
}

EvaluationResult score(std::vector<TrajectoryPredictions> per, std::size_t horizon) {
    EvaluationResult out;
    std::vector<Matrix> preds;
    std::vector<Matrix> truths;
    for (const auto& tp : per) {
        for (const auto& w : tp.windows) {
            preds.push_back(w.prediction.values);
            truths.push_back(w.target);
        }
    }
    out.axis_rmse = rmse_per_axis(preds, truths, horizon);
    out.curve = horizon_curve(preds, truths, horizon);
    out.trajectories = std::move(per);
    return out;
}

RolloutOptions evaluation_rollout(const EvaluationOptions& options) {
    RolloutOptions opt;
    opt.autoregressive = options.autoregressive;
    opt.compute_gradients = false;
    opt.keep_predictions = true;
    return opt;
}

} // namespace

const char* axis_name(Axis axis) {
    switch (axis) {
    case Axis::Radial: return "radial";
    case Axis::InTrack: return "in-track";
    case Axis::CrossTrack: return "cross-track";
    }
    return "?";
}

Axis axis_from_name(const std::string& name) {
    for (Axis a : {Axis::Radial, Axis::InTrack, Axis::CrossTrack}) {
        if (name == axis_name(a)) return a;
    }
    throw ParseError("unknown axis '" + name + "'");
}

double HorizonCurve::tail_slope() const {
    if (rmse.size() < 3) throw ContractError("tail_slope: need at least 3 steps");
    const std::size_t k = rmse.size() - 1;
    return 0.5 * ((rmse[k] - rmse[k - 1]) + (rmse[k - 1] - rmse[k - 2]));
}

std::vector<AxisRmse> rmse_per_axis(std::span<const Matrix> predictions,
                                    std::span<const Matrix> truths, std::size_t horizon) {
    check_pairs(predictions, truths, horizon, "rmse_per_axis");
    std::size_t max_agents = 0;
    for (const auto& p : predictions) max_agents = std::max(max_agents, p.rows());
    std::vector<double> sums(max_agents * kAxes, 0.0);
    std::vector<std::size_t> counts(max_agents, 0);
    for (std::size_t w = 0; w < predictions.size(); ++w) {
        const Matrix& p = predictions[w];
        const Matrix& t = truths[w];
        for (std::size_t i = 0; i < p.rows(); ++i) {
            for (std::size_t k = 0; k < horizon; ++k) {
                for (std::size_t a = 0; a < kAxes; ++a) {
                    const double d = p(i, k * kStateDim + a) - t(i, k * kStateDim + a);
                    sums[i * kAxes + a] += d * d;
                }
            }
            counts[i] += horizon;
        }
    }
    std::vector<AxisRmse> out;
    for (std::size_t i = 0; i < max_agents; ++i) {
        for (std::size_t a = 0; a < kAxes; ++a) {
            out.push_back({i + 1, static_cast<Axis>(a),
                           std::sqrt(sums[i * kAxes + a] / static_cast<double>(counts[i]))});
        }
    }
    return out;
}

HorizonCurve horizon_curve(std::span<const Matrix> predictions, std::span<const Matrix> truths,
                           std::size_t horizon) {
    check_pairs(predictions, truths, horizon, "horizon_curve");
    std::vector<double> sums(horizon, 0.0);
    std::size_t count = 0;
    for (std::size_t w = 0; w < predictions.size(); ++w) {
        const Matrix& p = predictions[w];
        const Matrix& t = truths[w];
        for (std::size_t i = 0; i < p.rows(); ++i) {
            for (std::size_t k = 0; k < horizon; ++k) {
                for (std::size_t a = 0; a < kAxes; ++a) {
                    const double d = p(i, k * kStateDim + a) - t(i, k * kStateDim + a);
                    sums[k] += d * d;
                }
            }
        }
        count += p.rows() * kAxes;
    }
    HorizonCurve curve;
    for (double s : sums) curve.rmse.push_back(std::sqrt(s / static_cast<double>(count)));
    return curve;
}

std::string metrics_csv(const RunMetrics& metrics) {
    std::ostringstream os;
    os << "satellite,axis,rmse_km,run_label\n";
    for (const auto& r : metrics.rows) {
        os << r.satellite << ',' << axis_name(r.axis) << ',' << format_double(r.rmse) << ','
           << metrics.label << '\n';
    }
    return os.str();
}

RunMetrics parse_metrics_csv(const std::string& text) {
    RunMetrics out;
    std::size_t line_no = 1;
    for (const auto& line : data_lines(text, "satellite,axis,rmse_km,run_label")) {
        ++line_no;
        const auto f = split_line(line);
        if (f.size() != 4) {
            throw ParseError("metrics csv: line " + std::to_string(line_no) + ": expected 4 fields");
        }
        if (out.rows.empty()) {
            out.label = f[3];
        } else if (f[3] != out.label) {
            throw ParseError("metrics csv: mixed run labels");
        }
        out.rows.push_back({static_cast<std::size_t>(parse_double(f[0], line_no)),
                            axis_from_name(f[1]), parse_double(f[2], line_no)});
    }
    return out;
}

std::string curve_csv(const HorizonCurve& curve) {
    std::ostringstream os;
    os << "step,rmse_km\n";
    for (std::size_t k = 0; k < curve.rmse.size(); ++k) {
        os << k + 1 << ',' << format_double(curve.rmse[k]) << '\n';
    }
    return os.str();
}

HorizonCurve parse_curve_csv(const std::string& text) {
    HorizonCurve curve;
    std::size_t line_no = 1;
    for (const auto& line : data_lines(text, "step,rmse_km")) {
        ++line_no;
        const auto f = split_line(line);
        if (f.size() != 2) {
            throw ParseError("curve csv: line " + std::to_string(line_no) + ": expected 2 fields");
        }
        curve.rmse.push_back(parse_double(f[1], line_no));
    }
    return curve;
}

ComparisonTable comparison_table(const RunMetrics& a, const RunMetrics& b) {
    auto keyed = [](const RunMetrics& m) {
        std::map<std::pair<std::size_t, int>, double> out;
        for (const auto& r : m.rows) out[{r.satellite, static_cast<int>(r.axis)}] = r.rmse;
        return out;
    };
    const auto ka = keyed(a);
    const auto kb = keyed(b);
    if (ka.size() != kb.size() ||
        !std::equal(ka.begin(), ka.end(), kb.begin(),
                    [](const auto& x, const auto& y) { return x.first == y.first; })) {
        throw ContractError("comparison_table: runs '" + a.label + "' and '" + b.label +
                            "' cover different satellites or axes");
    }
    const int wa = static_cast<int>(std::max<std::size_t>(12, a.label.size() + 2));
    const int wb = static_cast<int>(std::max<std::size_t>(12, b.label.size() + 2));
    std::ostringstream text;
    std::ostringstream csv;
    text << std::left << std::setw(11) << "satellite" << std::setw(13) << "axis" << std::right
         << std::setw(wa) << a.label << std::setw(wb) << b.label << '\n';
    csv << "satellite,axis," << a.label << ',' << b.label << '\n';
    for (const auto& [key, va] : ka) {
        const double vb = kb.at(key);
        const char* axis = axis_name(static_cast<Axis>(key.second));
        text << std::left << std::setw(11) << ("Sat " + std::to_string(key.first))
             << std::setw(13) << axis << std::right << std::fixed << std::setprecision(4)
             << std::setw(wa) << va << std::setw(wb) << vb << '\n';
        csv << key.first << ',' << axis << ',' << format_double(va) << ',' << format_double(vb)
            << '\n';
    }
    return {text.str(), csv.str()};
}

EvaluationResult evaluate(std::span<const ScenarioTrajectory> trajectories, const Model& model,
                          const EvaluationOptions& options) {
    if (trajectories.empty()) throw ContractError("evaluate: no trajectories");
    const RolloutOptions opt = evaluation_rollout(options);
    std::vector<TrajectoryPredictions> per(trajectories.size());
    const auto count = static_cast<std::ptrdiff_t>(trajectories.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto& traj = trajectories[static_cast<std::size_t>(i)];
        per[static_cast<std::size_t>(i)] = {traj.index,
                                            rollout_trajectory(traj, model, opt).outputs};
    }
    return score(std::move(per), model.config.horizon);
}

EvaluationResult evaluate_serial(std::span<const ScenarioTrajectory> trajectories,
                                 const Model& model, const EvaluationOptions& options) {
    if (trajectories.empty()) throw ContractError("evaluate: no trajectories");
    const RolloutOptions opt = evaluation_rollout(options);
    std::vector<TrajectoryPredictions> per;
    for (const auto& traj : trajectories) {
        per.push_back({traj.index, rollout_trajectory(traj, model, opt).outputs});
    }
    return score(std::move(per), model.config.horizon);
}

void write_text_file(const std::string& path, const std::string& text) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    out.close();
    if (!out) throw std::runtime_error("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> emit_plots(const ScenarioTrajectory& trajectory,
                                    std::span<const WindowOutput> windows,
                                    const std::string& out_dir) {
    if (windows.empty()) throw ContractError("emit_plots: no windows");
    const std::size_t horizon = windows.front().prediction.horizon;
    const std::size_t agents = trajectory.agent_count();
    const std::filesystem::path dir(out_dir);
    std::vector<std::string> written;

    // Step whose state the last horizon column predicts, per window.
    std::vector<std::size_t> steps;
    for (const auto& w : windows) {
        const std::size_t t = w.target_step + horizon - 1;
        if (t >= trajectory.step_count() || w.prediction.agents() != agents) {
            throw ContractError("emit_plots: window does not belong to this trajectory");
        }
        steps.push_back(t);
    }

    static const char* const kAxisLabel[3] = {"x radial [km]", "y in-track [km]",
                                              "z cross-track [km]"};
    for (std::size_t i = 0; i < agents; ++i) {
        const std::size_t col = (horizon - 1) * kStateDim;
        std::ostringstream csv;
        csv << "step,time_s,truth_x,truth_y,truth_z,pred_x,pred_y,pred_z\n";
        std::vector<Series> truth(3), pred(3);
        for (std::size_t w = 0; w < windows.size(); ++w) {
            const std::size_t t = steps[w];
            const auto p = trajectory.states[t][i].position();
            const double time = static_cast<double>(t) * trajectory.dt;
            csv << t << ',' << format_double(time);
            for (std::size_t a = 0; a < 3; ++a) csv << ',' << format_double(p[a]);
            for (std::size_t a = 0; a < 3; ++a) {
                csv << ',' << format_double(windows[w].prediction.values(i, col + a));
            }
            csv << '\n';
            for (std::size_t a = 0; a < 3; ++a) {
                truth[a].x.push_back(time);
                truth[a].y.push_back(p[a]);
                pred[a].x.push_back(time);
                pred[a].y.push_back(windows[w].prediction.values(i, col + a));
            }
        }
        std::ostringstream svg;
        const double width = 720.0;
        const double panel_h = 170.0;
        svg << svg_open(width, 3 * (panel_h + 50) + 40);
        svg << "<text x=\"90\" y=\"20\" font-size=\"13\">Satellite " << i + 1
            << ": truth vs " << horizon << "-step-ahead prediction</text>\n";
        legend(svg, 480, 16);
        for (std::size_t a = 0; a < 3; ++a) {
            truth[a].color = "#1f77b4";
            pred[a].color = "#d62728";
            pred[a].dashed = true;
            const Panel panel{90.0, 50.0 + static_cast<double>(a) * (panel_h + 50), width - 120,
                              panel_h};
            draw_panel(svg, panel, {truth[a], pred[a]}, kAxisLabel[a], "");
        }
        svg << "<text x=\"" << fixed(width / 2) << "\" y=\"" << fixed(3 * (panel_h + 50) + 30)
            << "\" text-anchor=\"middle\">time [s]</text>\n</svg>\n";

        const std::string stem = "sat" + std::to_string(i + 1) + "_comparison";
        write_text_file((dir / (stem + ".csv")).string(), csv.str());
        write_text_file((dir / (stem + ".svg")).string(), svg.str());
        written.push_back((dir / (stem + ".svg")).string());
        written.push_back((dir / (stem + ".csv")).string());
    }

    std::vector<Matrix> preds;
    std::vector<Matrix> truths;
    for (const auto& w : windows) {
        preds.push_back(w.prediction.values);
        truths.push_back(w.target);
    }
    const HorizonCurve curve = horizon_curve(preds, truths, horizon);
    Series s;
    s.color = "#d62728";
    for (std::size_t k = 0; k < curve.rmse.size(); ++k) {
        s.x.push_back(static_cast<double>(k + 1));
        s.y.push_back(curve.rmse[k]);
    }
    std::ostringstream svg;
    svg << svg_open(640, 360);
    svg << "<text x=\"90\" y=\"20\" font-size=\"13\">Prediction error from truth</text>\n";
    draw_panel(svg, {90.0, 50.0, 520.0, 250.0}, {s}, "total position RMSE [km]", "");
    svg << "<text x=\"350\" y=\"340\" text-anchor=\"middle\">horizon step</text>\n</svg>\n";
    write_text_file((dir / "horizon_error.csv").string(), curve_csv(curve));
    write_text_file((dir / "horizon_error.svg").string(), svg.str());
    written.push_back((dir / "horizon_error.svg").string());
    written.push_back((dir / "horizon_error.csv").string());
    return written;
}

} // namespace orbitgraph
