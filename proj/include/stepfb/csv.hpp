#pragma once

#include <sstream>
#include <string>

#include "stepfb/estimator.hpp"
#include "stepfb/fileio.hpp"
#include "stepfb/harness.hpp"

namespace stepfb {

// CSV renderings of the harness outputs. Doubles use %.17g so files parse
// back to the exact values and identical runs produce identical bytes.

inline std::string ber_table_to_csv(const BerTable& table) {
    std::ostringstream out;
    out << "tnr_db,scheme,zeta,n_t,modulation,bits_sent,bit_errors,ber,ci_lo,ci_hi\n";
    for (const auto& c : table) {
        out << fmt_g17(c.tnr_db) << ',' << c.scheme << ',';
        if (c.scheme != "OBS") out << fmt_g17(c.zeta);
        out << ',' << c.n_t << ',' << scheme_name(c.mod) << ',' << c.bits_sent << ','
            << c.bit_errors << ',' << fmt_g17(c.ber) << ',' << fmt_g17(c.ci_lo) << ','
            << fmt_g17(c.ci_hi) << "\n";
    }
    return out.str();
}

inline std::string histogram_to_csv(const Histogram& h) {
    std::ostringstream out;
    out << "bin_lo,bin_hi,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        out << fmt_g17(h.edges[i]) << ',' << fmt_g17(h.edges[i + 1]) << ',' << h.counts[i]
            << "\n";
    return out.str();
}

inline std::string convergence_to_csv(const std::vector<ConvergenceStats>& stats) {
    std::ostringstream out;
    out << "zeta,n_t,quantized,sessions,median_iters,mean_iters,frac_converged,"
           "feedback_bits_mean\n";
    for (const auto& s : stats) {
        out << fmt_g17(s.zeta) << ',' << s.n_t << ',' << (s.quantized ? 1 : 0) << ','
            << s.sessions << ',' << fmt_g17(s.median_iters) << ',' << fmt_g17(s.mean_iters)
            << ',' << fmt_g17(s.frac_converged) << ',' << fmt_g17(s.feedback_bits_mean) << "\n";
    }
    return out.str();
}

inline std::string trace_to_csv(const SessionTrace& trace) {
    std::ostringstream out;
    out << "k,mu_opt,mu_sent,err_sq\n";
    for (const auto& r : trace.records)
        out << r.k << ',' << fmt_g17(r.mu_opt) << ',' << fmt_g17(r.mu_sent) << ','
            << fmt_g17(r.err_sq) << "\n";
    return out.str();
}

// Hex dump of the session's reverse-link frames, one per line.
inline std::string trace_frames_to_text(const SessionTrace& trace, unsigned bits_per_index) {
    std::ostringstream out;
    for (const auto& msg : trace.messages) out << to_hex(encode_message(msg, bits_per_index)) << "\n";
    return out.str();
}

}  // namespace stepfb
