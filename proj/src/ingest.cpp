#include "twostage/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "twostage/parallel.hpp"
#include "twostage/tsv.hpp"

namespace twostage {

namespace {

double mean(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

std::size_t ipow(std::size_t base, std::size_t exp, std::size_t cap) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < exp; ++i) {
        if (r > cap / base) return cap + 1;
        r *= base;
    }
    return r;
}

// Mean of every with-replacement resample, odometer order with the last index fastest.
std::vector<double> resample_means(std::span<const double> x, std::size_t count) {
    const std::size_t r = x.size();
    std::vector<std::size_t> digit(r, 0);
    std::vector<double> out;
    out.reserve(count);
    std::vector<std::size_t> times(r);
    for (std::size_t c = 0; c < count; ++c) {
        // Sum by multiplicity in replicate order, so every ordering of the same
        // multiset yields the same double.
        std::fill(times.begin(), times.end(), 0);
        for (std::size_t j = 0; j < r; ++j) ++times[digit[j]];
        double s = 0.0;
        for (std::size_t j = 0; j < r; ++j) s += static_cast<double>(times[j]) * x[j];
        out.push_back(s / static_cast<double>(r));
        for (std::size_t j = r; j-- > 0;) {
            if (++digit[j] < r) break;
            digit[j] = 0;
        }
    }
    return out;
}

}  // namespace

double logfold(std::span<const double> ko, std::span<const double> wt) {
    if (ko.empty() || wt.empty()) throw std::domain_error("logfold: empty replicate set");
    const double mk = mean(ko), mw = mean(wt);
    if (!(mk > 0.0) || !(mw > 0.0)) throw std::domain_error("logfold: replicate means must be positive");
    return std::log2(mk / mw);
}

std::vector<double> bootstrap_logfolds(std::span<const double> ko, std::span<const double> wt, std::size_t cap) {
    if (ko.empty() || wt.empty()) throw std::domain_error("bootstrap: empty replicate set");
    for (double v : ko)
        if (!(v > 0.0)) throw std::domain_error("bootstrap: counts must be positive");
    for (double v : wt)
        if (!(v > 0.0)) throw std::domain_error("bootstrap: counts must be positive");
    const std::size_t nk = ipow(ko.size(), ko.size(), cap);
    const std::size_t nw = ipow(wt.size(), wt.size(), cap);
    if (nk > cap || nw > cap || nk > cap / nw)
        throw ConfigError("exhaustive bootstrap would need more than " + std::to_string(cap) +
                          " combinations; random resampling is not supported");
    const auto mk = resample_means(ko, nk);
    const auto mw = resample_means(wt, nw);
    std::vector<double> out;
    out.reserve(nk * nw);
    for (double a : mk)
        for (double b : mw) out.push_back(std::log2(a / b));
    return out;
}

BootstrapSd bootstrap_sd(std::span<const double> ko, std::span<const double> wt, std::size_t cap) {
    const auto b = bootstrap_logfolds(ko, wt, cap);
    BootstrapSd r;
    r.count = b.size();
    if (b.size() < 2) return r;
    // Shifting by the first value keeps identical draws at exactly zero spread.
    const double shift = b[0];
    double s = 0.0;
    for (double v : b) s += v - shift;
    const double m = s / static_cast<double>(b.size());
    double ss = 0.0;
    for (double v : b) ss += (v - shift - m) * (v - shift - m);
    r.sd = std::sqrt(ss / static_cast<double>(b.size() - 1));
    return r;
}

ReplicateData parse_counts(std::string_view text, const std::string& source) {
    const TsvTable t = parse_tsv(text, source);
    if (t.header.empty() || t.header[0] != "gene_id") throw InputError(source + ": first column must be gene_id");
    const std::size_t fields = t.header.size() - 1;
    if (fields == 0 || fields % 2 != 0)
        throw InputError(source + ": expected gene_id followed by equal numbers of ko_ and wt_ columns");
    const std::size_t r = fields / 2;
    for (std::size_t j = 0; j < r; ++j) {
        if (t.header[1 + j] != "ko_" + std::to_string(j + 1) || t.header[1 + r + j] != "wt_" + std::to_string(j + 1))
            throw InputError(source + ": header must be gene_id, ko_1..ko_" + std::to_string(r) + ", wt_1..wt_" +
                             std::to_string(r) + " (inconsistent replicate columns)");
    }
    if (t.rows.empty()) throw InputError(source + ": no data rows");
    ReplicateData d;
    d.replicates = r;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::string where = t.where(i);
        GeneCounts g;
        g.id = row[0];
        if (g.id.empty()) throw InputError(where + ": empty gene_id");
        if (!seen.insert(g.id).second) throw InputError(where + ": duplicate gene_id '" + g.id + "'");
        for (std::size_t j = 0; j < 2 * r; ++j) {
            const double v = parse_double(row[1 + j], where);
            if (!(v > 0.0)) throw InputError(where + ": count in column " + t.header[1 + j] + " must be > 0");
            (j < r ? g.ko : g.wt).push_back(v);
        }
        d.genes.push_back(std::move(g));
    }
    return d;
}

ReplicateData read_counts(const std::string& path) { return parse_counts(read_text(path), path); }

std::vector<FoldChange> summarize(const ReplicateData& data, unsigned threads) {
    std::vector<FoldChange> out(data.genes.size());
    parallel_for(data.genes.size(), threads, [&](std::size_t i) {
        const auto& g = data.genes[i];
        const auto b = bootstrap_sd(g.ko, g.wt);
        out[i] = {g.id, logfold(g.ko, g.wt), b.sd, b.count};
    });
    return out;
}

void write_summary(const std::vector<FoldChange>& summary, const std::string& path, const std::string& comment) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "gene_id\tbeta_hat\tsd_boot\n";
    for (const auto& f : summary)
        out << f.id << '\t' << format_double(f.beta_hat) << '\t' << format_double(f.sd_boot) << '\n';
    if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace twostage
