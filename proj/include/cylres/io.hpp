// io.hpp: JSON forms of windows and contours, CSV tables with 17 significant
// digits, and tabulated coefficient models.
#pragma once

#include "cylres/error.hpp"
#include "cylres/geometry.hpp"
#include "cylres/numerics.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace cylres {

using json = nlohmann::json;

// ------------------------------------------------------------------------ JSON

inline json to_json(const CylinderGrid& g) {
    return {{"m", g.m}, {"d", g.d}, {"L", g.L}, {"N_x", g.nx}, {"N_y", g.ny}};
}

inline CylinderGrid grid_from_json(const json& j) {
    CylinderGrid g;
    g.m = j.value("m", g.m);
    g.d = j.value("d", g.d);
    g.L = j.value("L", g.L);
    g.nx = j.value("N_x", g.nx);
    g.ny = j.value("N_y", g.ny);
    g.validate();
    return g;
}

/// Window plus contour as one document. Real fields survive the round trip
/// bit-exactly: the JSON writer emits the shortest decimal that reparses to the
/// same double.
inline json to_json(const SpectralWindow& w, const Contour& c, const CylinderGrid& g) {
    json j = to_json(g);
    j["k0"] = w.k0;
    j["lambda0"] = w.lambda0;
    j["delta"] = w.delta;
    j["J"] = w.J;
    j["eta"] = c.eta;
    j["Xi"] = c.Xi;
    j["panels"] = c.panels;
    j["order"] = c.order;
    j["grading"] = c.grading;
    return j;
}

struct WindowSpec {
    CylinderGrid grid;
    SpectralWindow window;
    Contour contour;
};

/// Rebuilds the window from (k0, lambda0, grid) and the contour from its
/// parameters; both constructions are deterministic.
inline WindowSpec window_from_json(const json& j) {
    WindowSpec s;
    s.grid = grid_from_json(j);
    s.window = build_window(j.at("k0").get<RVec>(), j.at("lambda0").get<double>(), s.grid);
    s.contour = build_contour(s.window.lambda0, j.at("eta").get<double>(), j.at("Xi").get<double>(),
                              j.at("panels").get<int>(), j.value("order", 16), j.value("grading", 0.0));
    return s;
}

inline json to_json(const cplx& z) { return json::array({z.real(), z.imag()}); }

// ------------------------------------------------------------------------- CSV

/// Header row plus rows of preformatted cells; doubles rendered with 17
/// significant digits independent of the locale.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    class Row {
    public:
        Row& operator<<(double v) {
            cells_.push_back(format_double(v));
            return *this;
        }
        Row& operator<<(int v) {
            cells_.push_back(std::to_string(v));
            return *this;
        }
        Row& operator<<(bool v) {
            cells_.push_back(v ? "1" : "0");
            return *this;
        }
        Row& operator<<(const std::string& v) {
            cells_.push_back(v);
            return *this;
        }
        Row& operator<<(cplx z) { return *this << z.real() << z.imag(); }

    private:
        friend class CsvTable;
        std::vector<std::string> cells_;
    };

    Row& row() {
        rows_.emplace_back();
        return rows_.back();
    }

    std::string str() const {
        std::ostringstream os;
        write_line(os, header_);
        for (const auto& r : rows_) {
            if (r.cells_.size() != header_.size())
                throw Error(ErrorKind::MissingData, "CSV row width does not match the header");
            write_line(os, r.cells_);
        }
        return os.str();
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(ErrorKind::MissingData, "cannot write " + path);
        out << str();
    }

    std::size_t size() const { return rows_.size(); }

private:
    static void write_line(std::ostream& os, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
        os << '\n';
    }

    std::vector<std::string> header_;
    std::vector<Row> rows_;
};

/// Parses a numeric CSV with a header row; returns the header and the rows.
inline std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingData, "cannot read " + path);
    std::string line;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    auto split = [](const std::string& l) {
        std::vector<std::string> out;
        std::stringstream ss(l);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        return out;
    };
    if (!std::getline(in, line)) throw Error(ErrorKind::MissingData, path + " is empty");
    header = split(line);
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> r;
        for (const auto& cell : split(line)) {
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc())
                throw Error(ErrorKind::ConfigError, path + ":" + std::to_string(lineno) + ": not a number: " + cell);
            r.push_back(v);
        }
        if (r.size() != header.size())
            throw Error(ErrorKind::ConfigError, path + ":" + std::to_string(lineno) + ": wrong column count");
        rows.push_back(std::move(r));
    }
    return {header, rows};
}

// ------------------------------------------------------------ tabulated model

/// Coefficients from samples on a tensor grid: columns x, g, V (y-independent) or
/// x, y, g, V with y in [0, 2 pi) (d = 1). Bilinear interpolation inside the
/// table; outside the x-range the coefficients take their free values g = 1, V = 0,
/// so the table must reach the decay region.
inline ModelCoefficients tabulated_model(const std::string& path) {
    const auto [header, rows] = read_csv(path);
    const bool with_y = header.size() == 4;
    if (!(header.size() == 3 || with_y) || header[0] != "x" || header.back() != "V" ||
        header[header.size() - 2] != "g" || (with_y && header[1] != "y"))
        throw Error(ErrorKind::ConfigError, path + ": expected header x,g,V or x,y,g,V");
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
        xs.push_back(r[0]);
        if (with_y) ys.push_back(r[1]);
    }
    auto uniq = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    };
    xs = uniq(xs);
    ys = with_y ? uniq(ys) : std::vector<double>{0.0};
    const std::size_t nxs = xs.size(), nys = ys.size();
    if (nxs < 2 || rows.size() != nxs * nys)
        throw Error(ErrorKind::ConfigError, path + ": samples do not form a tensor grid");
    std::vector<double> G(nxs * nys, 1.0), V(nxs * nys, 0.0);
    for (const auto& r : rows) {
        const auto ix = std::size_t(std::lower_bound(xs.begin(), xs.end(), r[0]) - xs.begin());
        const auto iy = with_y ? std::size_t(std::lower_bound(ys.begin(), ys.end(), r[1]) - ys.begin()) : 0;
        G[ix * nys + iy] = r[r.size() - 2];
        V[ix * nys + iy] = r.back();
        if (!(r[r.size() - 2] > 0.0)) throw Error(ErrorKind::InvalidModel, path + ": g must be positive");
    }
    // periodic in y, linear in x
    auto interp = [xs, ys, nys, with_y](const std::vector<double>& F, double free_value) {
        return [=](double x, std::span<const double> y) {
            if (x < xs.front() || x > xs.back()) return free_value;
            std::size_t i = std::size_t(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
            i = std::clamp<std::size_t>(i, 1, xs.size() - 1);
            const double tx = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            auto at_x = [&](std::size_t iy) { return (1 - tx) * F[(i - 1) * nys + iy] + tx * F[i * nys + iy]; };
            if (!with_y) return at_x(0);
            double yy = std::fmod(y[0], two_pi);
            if (yy < 0) yy += two_pi;
            std::size_t j = std::size_t(std::upper_bound(ys.begin(), ys.end(), yy) - ys.begin());
            const std::size_t j0 = j == 0 ? nys - 1 : j - 1, j1 = j % nys;
            double y0 = ys[j0], y1 = ys[j1];
            if (j == 0) y0 -= two_pi;
            if (j == nys) y1 += two_pi;
            const double ty = (yy - y0) / (y1 - y0);
            return (1 - ty) * at_x(j0) + ty * at_x(j1);
        };
    };
    ModelCoefficients c;
    c.family = "tabulated";
    c.g = interp(G, 1.0);
    c.V = interp(V, 0.0);
    c.y_independent = !with_y;
    c.metric_trivial = std::all_of(G.begin(), G.end(), [](double v) { return v == 1.0; });
    c.potential_trivial = std::all_of(V.begin(), V.end(), [](double v) { return v == 0.0; });
    c.c0 = std::min(1.0, *std::min_element(G.begin(), G.end()));
    c.x_edges = {xs.front(), xs.back()};
    return c;
}

} // namespace cylres
