#pragma once

// CSV tables (the source of truth) and static SVG renderings of them.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "nar/core/bytes.hpp"
#include "nar/core/error.hpp"
#include "nar/evaluation/metrics.hpp"
#include "nar/evaluation/profile.hpp"

namespace nar::report {

namespace fs = std::filesystem;

inline constexpr int kCsvSchemaVersion = 1;

/// Shortest decimal text that reads back to the same double.
inline std::string num(double v) {
    char buf[32];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline std::string fixed(double v, int digits = 3) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

using Row = std::vector<std::string>;

struct Table {
    Row header;
    std::vector<Row> rows;

    std::size_t column(const std::string& name) const {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw FormatError("csv: missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    }
};

inline std::string to_csv(const Table& t) {
    std::ostringstream os;
    auto line = [&](const Row& r) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (r[i].find_first_of(",\n\"") != std::string::npos) throw InvalidArgument("csv field needs quoting: " + r[i]);
            os << (i ? "," : "") << r[i];
        }
        os << '\n';
    };
    line(t.header);
    for (const auto& r : t.rows) line(r);
    return os.str();
}

inline Table parse_csv(const std::string& text, const std::string& what = "csv") {
    Table t;
    std::istringstream is(text);
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Row r;
        std::size_t start = 0;
        while (true) {
            const auto c = line.find(',', start);
            r.push_back(line.substr(start, c == std::string::npos ? std::string::npos : c - start));
            if (c == std::string::npos) break;
            start = c + 1;
        }
        if (first) {
            t.header = std::move(r);
            first = false;
        } else {
            if (r.size() != t.header.size()) throw FormatError(what + ": row width differs from header");
            t.rows.push_back(std::move(r));
        }
    }
    if (first) throw FormatError(what + ": empty file");
    return t;
}

inline void write_table(const fs::path& path, const Table& t) { write_file(path, to_csv(t)); }
inline Table read_table(const fs::path& path) { return parse_csv(read_file(path), path.string()); }

// ----------------------------------------------------------------------------------------
// Run records and their reductions.

/// One trained-and-evaluated configuration.
struct RunRecord {
    std::string task;
    std::string variant;  // baseline, openbook, multi_aug, paired, untrained
    std::string param;    // sweep coordinate ("" when none)
    std::uint64_t seed = 0;
    std::vector<double> passes;  // aggregate F1 per bank resample
    double hint_accuracy = 0.0;
    std::string checkpoint;      // params digest (hex)

    evaluation::MeanStd f1() const { return evaluation::mean_std(passes); }
};

inline Table runs_table(const std::vector<RunRecord>& runs) {
    Table t{{"task", "variant", "param", "seed", "f1_mean", "f1_std", "hint_accuracy", "passes", "checkpoint"}, {}};
    for (const auto& r : runs) {
        std::string passes;
        for (std::size_t i = 0; i < r.passes.size(); ++i) passes += (i ? ";" : "") + num(r.passes[i]);
        const auto s = r.f1();
        t.rows.push_back({r.task, r.variant, r.param, std::to_string(r.seed), num(s.mean), num(s.std),
                          num(r.hint_accuracy), passes, r.checkpoint});
    }
    return t;
}

inline std::vector<RunRecord> runs_from_table(const Table& t) {
    std::vector<RunRecord> out;
    const auto ct = t.column("task"), cv = t.column("variant"), cp = t.column("param"), cs = t.column("seed"),
               ch = t.column("hint_accuracy"), cps = t.column("passes"), cc = t.column("checkpoint");
    for (const auto& row : t.rows) {
        RunRecord r;
        r.task = row[ct];
        r.variant = row[cv];
        r.param = row[cp];
        try {
            r.seed = std::stoull(row[cs]);
            r.hint_accuracy = std::stod(row[ch]);
            std::size_t start = 0;
            const std::string& p = row[cps];
            while (start < p.size()) {
                const auto c = p.find(';', start);
                r.passes.push_back(std::stod(p.substr(start, c == std::string::npos ? std::string::npos : c - start)));
                if (c == std::string::npos) break;
                start = c + 1;
            }
        } catch (const std::logic_error&) {
            throw FormatError("runs csv: unparsable number in row for " + r.task);
        }
        r.checkpoint = row[cc];
        out.push_back(std::move(r));
    }
    return out;
}

struct SummaryRow {
    std::string task, variant, param;
    std::size_t runs = 0;
    evaluation::MeanStd f1;  // over every pass of every seed
};

/// Groups runs by (task, variant, param) in first-appearance order and pools their passes.
inline std::vector<SummaryRow> summarize(const std::vector<RunRecord>& runs) {
    std::vector<SummaryRow> rows;
    std::vector<std::vector<double>> pooled;
    std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index;
    for (const auto& r : runs) {
        auto [it, fresh] = index.try_emplace({r.task, r.variant, r.param}, rows.size());
        if (fresh) {
            rows.push_back({r.task, r.variant, r.param, 0, {}});
            pooled.emplace_back();
        }
        rows[it->second].runs += 1;
        pooled[it->second].insert(pooled[it->second].end(), r.passes.begin(), r.passes.end());
    }
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].f1 = evaluation::mean_std(pooled[i]);
    return rows;
}

inline Table summary_table(const std::vector<SummaryRow>& rows) {
    Table t{{"task", "variant", "param", "runs", "f1_mean", "f1_std"}, {}};
    for (const auto& r : rows) {
        t.rows.push_back({r.task, r.variant, r.param, std::to_string(r.runs), num(r.f1.mean), num(r.f1.std)});
    }
    return t;
}

struct Comparison {
    std::string task;
    double before = 0.0;
    double after = 0.0;
    double delta() const { return after - before; }
};

/// Pairs `before` and `after` variants of each task, sorted by descending improvement (ties by task).
inline std::vector<Comparison> compare(const std::vector<SummaryRow>& rows, const std::string& before,
                                       const std::string& after) {
    std::map<std::string, Comparison> m;
    std::map<std::string, int> seen;
    for (const auto& r : rows) {
        if (r.variant != before && r.variant != after) continue;
        auto& c = m[r.task];
        c.task = r.task;
        (r.variant == before ? c.before : c.after) = r.f1.mean;
        seen[r.task] |= r.variant == before ? 1 : 2;
    }
    std::vector<Comparison> out;
    for (const auto& [task, c] : m) {
        if (seen[task] == 3) out.push_back(c);
    }
    std::stable_sort(out.begin(), out.end(), [](const Comparison& a, const Comparison& b) { return a.delta() > b.delta(); });
    return out;
}

inline Table comparison_table(const std::vector<Comparison>& cs, const std::string& before, const std::string& after) {
    Table t{{"task", before, after, "delta"}, {}};
    for (const auto& c : cs) t.rows.push_back({c.task, num(c.before), num(c.after), num(c.delta())});
    return t;
}

// ----------------------------------------------------------------------------------------
// Attention profiles.

inline Table profile_table(const std::vector<evaluation::AttentionProfile>& ps) {
    Table t{{"target", "source", "weight"}, {}};
    for (const auto& p : ps) {
        for (const auto& [src, w] : p.weights) t.rows.push_back({p.target, src, num(w)});
    }
    return t;
}

inline std::vector<evaluation::AttentionProfile> profiles_from_table(const Table& t) {
    const auto ct = t.column("target"), cs = t.column("source"), cw = t.column("weight");
    std::vector<evaluation::AttentionProfile> out;
    for (const auto& row : t.rows) {
        if (out.empty() || out.back().target != row[ct]) out.push_back({row[ct], {}});
        out.back().weights[row[cs]] = std::stod(row[cw]);
    }
    return out;
}

inline Table partner_table(const std::vector<evaluation::AttentionProfile>& ps) {
    Table t{{"target", "partner", "weight"}, {}};
    for (const auto& p : ps) {
        const auto partner = evaluation::select_partner(p, p.target);
        t.rows.push_back({p.target, partner, num(p.weights.at(partner))});
    }
    return t;
}

// ----------------------------------------------------------------------------------------
// SVG.

namespace detail {

inline std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
        switch (c) {
            case '<': o += "&lt;"; break;
            case '>': o += "&gt;"; break;
            case '&': o += "&amp;"; break;
            case '"': o += "&quot;"; break;
            default: o += c;
        }
    }
    return o;
}

}  // namespace detail

/// Grouped before/after bars per task, in the given order (callers pass compare()'s order).
inline std::string bar_chart_svg(const std::vector<Comparison>& cs, const std::string& title,
                                 const std::string& before = "baseline", const std::string& after = "openbook") {
    const int bar = 18, gap = 24, left = 60, top = 40, height = 200;
    const int width = left + static_cast<int>(cs.size()) * (2 * bar + gap) + 40;
    const int total_h = top + height + 110;
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << total_h << "\">\n";
    o << "<text x=\"" << left << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << detail::esc(title)
      << "</text>\n";
    o << "<line x1=\"" << left << "\" y1=\"" << top + height << "\" x2=\"" << width - 20 << "\" y2=\"" << top + height
      << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double y = top + height - height * k / 4.0;
        o << "<text x=\"" << left - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
          << "font-size=\"10\">" << fixed(k / 4.0, 2) << "</text>\n";
    }
    for (std::size_t i = 0; i < cs.size(); ++i) {
        const auto& c = cs[i];
        const int x = left + 10 + static_cast<int>(i) * (2 * bar + gap);
        o << "<g class=\"bar\" data-task=\"" << detail::esc(c.task) << "\" data-delta=\"" << num(c.delta()) << "\">\n";
        auto rect = [&](int bx, double v, const char* fill, const std::string& label) {
            const double h = std::clamp(v, 0.0, 1.0) * height;
            o << "  <rect x=\"" << bx << "\" y=\"" << top + height - h << "\" width=\"" << bar << "\" height=\"" << h
              << "\" fill=\"" << fill << "\"><title>" << detail::esc(label) << " " << num(v) << "</title></rect>\n";
        };
        rect(x, c.before, "#9e9e9e", before);
        rect(x + bar, c.after, "#1f77b4", after);
        o << "  <text transform=\"translate(" << x + bar << "," << top + height + 12 << ") rotate(45)\" "
          << "font-family=\"sans-serif\" font-size=\"10\">" << detail::esc(c.task) << " (" << (c.delta() >= 0 ? "+" : "")
          << fixed(c.delta()) << ")</text>\n";
        o << "</g>\n";
    }
    o << "</svg>\n";
    return o.str();
}

/// Target-by-source grid. Each cell's <title> carries the exact CSV weight text.
inline std::string heatmap_svg(const std::vector<evaluation::AttentionProfile>& ps, const std::string& title) {
    std::vector<std::string> sources;
    for (const auto& p : ps) {
        for (const auto& [s, w] : p.weights) {
            if (std::find(sources.begin(), sources.end(), s) == sources.end()) sources.push_back(s);
        }
    }
    std::sort(sources.begin(), sources.end());
    const int cell = 48, left = 130, top = 130;
    const int width = left + cell * static_cast<int>(sources.size()) + 20;
    const int height = top + cell * static_cast<int>(ps.size()) + 20;
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    o << "<text x=\"10\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << detail::esc(title) << "</text>\n";
    for (std::size_t j = 0; j < sources.size(); ++j) {
        const int x = left + static_cast<int>(j) * cell + cell / 2;
        o << "<text transform=\"translate(" << x << "," << top - 6 << ") rotate(-60)\" font-family=\"sans-serif\" "
          << "font-size=\"10\">" << detail::esc(sources[j]) << "</text>\n";
    }
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const int y = top + static_cast<int>(i) * cell;
        o << "<text x=\"" << left - 6 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"end\" "
          << "font-family=\"sans-serif\" font-size=\"10\">" << detail::esc(ps[i].target) << "</text>\n";
        for (std::size_t j = 0; j < sources.size(); ++j) {
            auto it = ps[i].weights.find(sources[j]);
            if (it == ps[i].weights.end()) continue;
            const double w = it->second;
            const int shade = 255 - static_cast<int>(std::clamp(w, 0.0, 1.0) * 200.0);
            const int x = left + static_cast<int>(j) * cell;
            o << "<g class=\"cell\" data-target=\"" << detail::esc(ps[i].target) << "\" data-source=\""
              << detail::esc(sources[j]) << "\">\n";
            o << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
              << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" stroke=\"white\"><title>" << num(w)
              << "</title></rect>\n";
            o << "  <text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\" "
              << "font-family=\"sans-serif\" font-size=\"10\">" << fixed(w, 2) << "</text>\n";
            o << "</g>\n";
        }
    }
    o << "</svg>\n";
    return o.str();
}

/// Writes runs.csv and summary.csv (header-only when `runs` is empty), plus comparison.csv/.svg
/// when both arms of `before`/`after` are present.
inline void emit_reports(const std::vector<RunRecord>& runs, const fs::path& outdir, const std::string& title,
                         const std::string& before = "baseline", const std::string& after = "openbook") {
    std::error_code ec;
    fs::create_directories(outdir, ec);
    if (ec) throw IoError("cannot create " + outdir.string() + ": " + ec.message());
    write_table(outdir / "runs.csv", runs_table(runs));
    const auto summary = summarize(runs);
    write_table(outdir / "summary.csv", summary_table(summary));
    const auto cmp = compare(summary, before, after);
    if (!cmp.empty()) {
        write_table(outdir / "comparison.csv", comparison_table(cmp, before, after));
        write_file(outdir / "comparison.svg", bar_chart_svg(cmp, title, before, after));
    }
}

inline void emit_profiles(const std::vector<evaluation::AttentionProfile>& ps, const fs::path& outdir) {
    write_table(outdir / "profiles.csv", profile_table(ps));
    write_table(outdir / "partners.csv", partner_table(ps));
    write_file(outdir / "heatmap.svg", heatmap_svg(ps, "attention profile (row: target, column: source)"));
}

}  // namespace nar::report
