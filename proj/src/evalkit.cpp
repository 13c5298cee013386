#include "canids/evalkit.hpp"

#include <cinttypes>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace canids {

void ConfusionMatrix::add(Label truth, Label pred, std::uint64_t n) {
    counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)] += n;
}

std::uint64_t ConfusionMatrix::row_sum(Label truth) const {
    std::uint64_t s = 0;
    for (auto v : counts[static_cast<std::size_t>(truth)]) s += v;
    return s;
}

std::uint64_t ConfusionMatrix::col_sum(Label pred) const {
    std::uint64_t s = 0;
    for (const auto& row : counts) s += row[static_cast<std::size_t>(pred)];
    return s;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (const auto& row : counts)
        for (auto v : row) s += v;
    return s;
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < kNumClasses; ++i) s += counts[i][i];
    return s;
}

ConfusionMatrix confusion(std::span<const Label> truth, std::span<const Label> pred) {
    if (truth.size() != pred.size()) throw std::runtime_error("confusion: label vectors differ in length");
    if (truth.empty()) throw std::runtime_error("confusion: no labels");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], pred[i]);
    return cm;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
    MetricsReport r;
    r.total = cm.total();
    if (r.total == 0) throw std::runtime_error("metrics: empty confusion matrix");
    r.misclassifications = r.total - cm.trace();
    r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(r.total);

    for (std::size_t c = 0; c < kNumClasses; ++c) {
        auto cls = static_cast<Label>(c);
        ClassMetrics& m = r.per_class[c];
        m.cls = cls;
        const auto tp = cm.counts[c][c];
        const auto actual = cm.row_sum(cls);
        const auto predicted = cm.col_sum(cls);
        const auto fn = actual - tp;
        if (predicted > 0) {
            m.precision = static_cast<double>(tp) / static_cast<double>(predicted);
            m.precision_defined = true;
        }
        if (actual > 0) {
            m.recall = static_cast<double>(tp) / static_cast<double>(actual);
            m.recall_defined = true;
            m.fnr = static_cast<double>(fn) / static_cast<double>(actual);
            m.fnr_defined = true;
        }
        if (m.precision_defined && m.recall_defined && m.precision + m.recall > 0.0) {
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
            m.f1_defined = true;
        }
    }

    const auto benign = static_cast<std::size_t>(Label::Benign);
    const auto benign_total = cm.row_sum(Label::Benign);
    if (benign_total > 0) {
        const auto false_alarms = benign_total - cm.counts[benign][benign];
        r.fpr = static_cast<double>(false_alarms) / static_cast<double>(benign_total);
        r.fpr_defined = true;
    }
    return r;
}

namespace {

void check_cost_args(std::span<const int> dims, int bits, int input_bits, int baseline_bits) {
    if (dims.size() < 2) throw std::runtime_error("cost model: need at least two layer widths");
    for (int d : dims)
        if (d <= 0) throw std::runtime_error("cost model: non-positive layer width");
    if (bits < 2 || bits > 8) throw std::runtime_error("cost model: bits out of range");
    if (input_bits < 1 || baseline_bits < 1) throw std::runtime_error("cost model: bad bit width");
}

}  // namespace

InferenceCost inference_cost(std::span<const int> dims, int bits, int input_bits, int baseline_bits) {
    std::vector<double> dense(dims.size() - 1, 1.0);
    return inference_cost_sparse(dims, bits, dense, input_bits, baseline_bits);
}

InferenceCost inference_cost_sparse(std::span<const int> dims, int bits, std::span<const double> nonzero,
                                    int input_bits, int baseline_bits) {
    check_cost_args(dims, bits, input_bits, baseline_bits);
    if (nonzero.size() != dims.size() - 1)
        throw std::runtime_error("cost model: need one nonzero fraction per layer");
    for (double f : nonzero)
        if (!(f >= 0.0 && f <= 1.0)) throw std::runtime_error("cost model: nonzero fraction outside [0,1]");

    InferenceCost c;
    double bops = 0.0, bops_base = 0.0, mem = 0.0, mem_base = 0.0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const auto macs = static_cast<std::uint64_t>(dims[l]) * static_cast<std::uint64_t>(dims[l + 1]);
        c.layer_macs.push_back(macs);
        c.macs += macs;
        const int in_bits = l == 0 ? input_bits : bits;
        const double layer_bops =
            static_cast<double>(macs) * nonzero[l] * static_cast<double>(bits) * static_cast<double>(in_bits);
        c.layer_bit_ops.push_back(static_cast<std::uint64_t>(layer_bops + 0.5));
        bops += layer_bops;
        mem += static_cast<double>(macs) * nonzero[l] * static_cast<double>(bits);
        const int base_in = l == 0 ? input_bits : baseline_bits;
        bops_base += static_cast<double>(macs) * static_cast<double>(baseline_bits) * static_cast<double>(base_in);
        mem_base += static_cast<double>(macs) * static_cast<double>(baseline_bits);
    }
    c.bit_ops = static_cast<std::uint64_t>(bops + 0.5);
    c.weight_mem_bits = static_cast<std::uint64_t>(mem + 0.5);
    c.bops_ratio = bops / bops_base;
    c.mem_ratio = mem / mem_base;
    c.normalized_cost = 0.5 * c.bops_ratio + 0.5 * c.mem_ratio;
    return c;
}

std::string confusion_csv(const ConfusionMatrix& cm) {
    std::ostringstream out;
    out << "true_class";
    for (std::size_t c = 0; c < kNumClasses; ++c) out << ",pred_" << label_name(static_cast<Label>(c));
    out << '\n';
    for (std::size_t t = 0; t < kNumClasses; ++t) {
        out << label_name(static_cast<Label>(t));
        for (std::size_t p = 0; p < kNumClasses; ++p) out << ',' << cm.counts[t][p];
        out << '\n';
    }
    return out.str();
}

ConfusionMatrix parse_confusion_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("confusion csv: empty input");
    ConfusionMatrix cm;
    for (std::size_t t = 0; t < kNumClasses; ++t) {
        if (!std::getline(in, line)) throw std::runtime_error("confusion csv: missing row");
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        std::istringstream row(line);
        std::string cell;
        if (!std::getline(row, cell, ',')) throw std::runtime_error("confusion csv: bad row");
        if (label_from_name(cell) != static_cast<Label>(t))
            throw std::runtime_error("confusion csv: rows out of order, got '" + cell + "'");
        for (std::size_t p = 0; p < kNumClasses; ++p) {
            if (!std::getline(row, cell, ',')) throw std::runtime_error("confusion csv: short row");
            try {
                std::size_t pos = 0;
                cm.counts[t][p] = std::stoull(cell, &pos);
                if (pos != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw std::runtime_error("confusion csv: bad count '" + cell + "'");
            }
        }
        if (std::getline(row, cell, ',')) throw std::runtime_error("confusion csv: extra cells");
    }
    return cm;
}

namespace {

std::string pct_or_na(double v, bool defined) {
    if (!defined) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v * 100.0);
    return buf;
}

}  // namespace

std::string metrics_csv(const MetricsReport& r) {
    std::ostringstream out;
    out << "class,precision_pct,recall_pct,f1_pct,fnr_pct\n";
    for (const auto& m : r.per_class) {
        out << label_name(m.cls) << ',' << pct_or_na(m.precision, m.precision_defined) << ','
            << pct_or_na(m.recall, m.recall_defined) << ',' << pct_or_na(m.f1, m.f1_defined) << ','
            << pct_or_na(m.fnr, m.fnr_defined) << '\n';
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "accuracy_pct,%.4f\nfpr_pct,%s\nmisclassified,%" PRIu64 "\ntotal,%" PRIu64 "\n",
                  r.accuracy * 100.0, pct_or_na(r.fpr, r.fpr_defined).c_str(), r.misclassifications, r.total);
    out << buf;
    return out.str();
}

std::string metrics_table(const MetricsReport& r) {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-10s %10s %10s %10s %10s\n", "class", "prec%", "recall%", "f1%", "fnr%");
    out << buf;
    for (const auto& m : r.per_class) {
        std::snprintf(buf, sizeof buf, "%-10s %10s %10s %10s %10s\n", label_name(m.cls),
                      pct_or_na(m.precision, m.precision_defined).c_str(),
                      pct_or_na(m.recall, m.recall_defined).c_str(), pct_or_na(m.f1, m.f1_defined).c_str(),
                      pct_or_na(m.fnr, m.fnr_defined).c_str());
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "accuracy %.4f%%  fpr %s%%  misclassified %" PRIu64 " of %" PRIu64 "\n",
                  r.accuracy * 100.0, pct_or_na(r.fpr, r.fpr_defined).c_str(), r.misclassifications, r.total);
    out << buf;
    return out.str();
}

std::string cost_csv(const InferenceCost& c) {
    std::ostringstream out;
    out << "layer,macs,bit_ops\n";
    for (std::size_t l = 0; l < c.layer_macs.size(); ++l)
        out << l << ',' << c.layer_macs[l] << ',' << c.layer_bit_ops[l] << '\n';
    char buf[240];
    std::snprintf(buf, sizeof buf,
                  "total_macs,%" PRIu64 "\ntotal_bit_ops,%" PRIu64 "\nweight_mem_bits,%" PRIu64
                  "\nbops_ratio,%.6f\nmem_ratio,%.6f\nnormalized_cost,%.6f\n",
                  c.macs, c.bit_ops, c.weight_mem_bits, c.bops_ratio, c.mem_ratio, c.normalized_cost);
    out << buf;
    return out.str();
}

std::string cost_table(const InferenceCost& c) {
    std::ostringstream out;
    char buf[240];
    for (std::size_t l = 0; l < c.layer_macs.size(); ++l) {
        std::snprintf(buf, sizeof buf, "layer %zu: %8" PRIu64 " MACs, %9" PRIu64 " bit-ops\n", l, c.layer_macs[l],
                      c.layer_bit_ops[l]);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "total: %" PRIu64 " MACs, %" PRIu64 " bit-ops, %" PRIu64 " weight bits (%.1f KiB)\n",
                  c.macs, c.bit_ops, c.weight_mem_bits, static_cast<double>(c.weight_mem_bits) / 8.0 / 1024.0);
    out << buf;
    std::snprintf(buf, sizeof buf, "vs baseline: bit-ops %.4fx, memory %.4fx, normalized cost %.4f\n", c.bops_ratio,
                  c.mem_ratio, c.normalized_cost);
    out << buf;
    return out.str();
}

}  // namespace canids
