// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <string>

#include "densreach/error.hpp"
#include "densreach/geometry.hpp"
#include "geometry_internal.hpp"

namespace densreach {

namespace {

using Face = std::vector<int>;

// Up to 6x6, row-major on the stack; the volume recursion builds millions
// of these.
struct SmallMatrix {
    std::array<double, 36> v{};
    int rows = 0;
    int cols = 0;

    double& at(int r, int c) { return v[static_cast<std::size_t>(r * 6 + c)]; }
};

// Row echelon form by partial pivoting, column order kept. Returns the
// rank (pivots above kSingular); `abs_det` is the product of pivot
// magnitudes, 0 when some column has no pivot.
int eliminate(SmallMatrix& m, double& abs_det) {
    abs_det = 1.0;
    int rank = 0;
    for (int c = 0; c < m.cols && rank < m.rows; ++c) {
        int pr = rank;
        double best = 0.0;
        for (int r = rank; r < m.rows; ++r) {
            if (std::abs(m.at(r, c)) > best) {
                best = std::abs(m.at(r, c));
                pr = r;
            }
        }
        if (best <= tol::kSingular) {
            abs_det = 0.0;
            continue;
        }
        if (pr != rank) {
            for (int k = 0; k < m.cols; ++k) {
                std::swap(m.at(pr, k), m.at(rank, k));
            }
        }
        abs_det *= best;
        const double piv = m.at(rank, c);
        for (int r = rank + 1; r < m.rows; ++r) {
            const double f = m.at(r, c) / piv;
            if (f == 0.0) {
                continue;
            }
            for (int k = c; k < m.cols; ++k) {
                m.at(r, k) -= f * m.at(rank, k);
            }
        }
        ++rank;
    }
    if (rank < m.cols) {
        abs_det = 0.0;
    }
    return rank;
}

class FanVolume {
  public:
    explicit FanVolume(const detail::VertexSet& vs) : pts_(vs.points), d_(static_cast<int>(vs.system.a.cols())) {
        const auto& a = vs.system.a;
        const auto& b = vs.system.b;
        active_.resize(a.rows());
        for (int j = 0; j < a.rows(); ++j) {
            for (int v = 0; v < static_cast<int>(pts_.size()); ++v) {
                const double scale = 1.0 + pts_[v].cwiseAbs().maxCoeff();
                if (std::abs(a.row(j).dot(pts_[v]) - b[j]) <= 1e-8 * scale) {
                    active_[j].push_back(v);
                }
            }
        }
    }

    int affine_rank(const Face& f) const {
        if (f.size() <= 1) {
            return 0;
        }
        // Rank of the difference vectors; rows are points, so the row count
        // may exceed 6 and is reduced by chunks that keep a running basis.
        SmallMatrix m;
        m.cols = d_;
        int rank = 0;
        double unused = 0.0;
        for (std::size_t i = 1; i < f.size(); ++i) {
            if (m.rows == 6) {
                rank = eliminate(m, unused);
                m.rows = rank;
                if (rank == d_) {
                    return rank;
                }
            }
            for (int c = 0; c < d_; ++c) {
                m.at(m.rows, c) = pts_[f[i]][c] - pts_[f[0]][c];
            }
            ++m.rows;
        }
        return eliminate(m, unused);
    }

    double run() {
        Face all(pts_.size());
        for (std::size_t i = 0; i < pts_.size(); ++i) {
            all[i] = static_cast<int>(i);
        }
        if (affine_rank(all) < d_) {
            return 0.0;
        }
        chain_.clear();
        total_ = 0.0;
        descend(all, d_);
        double fact = 1.0;
        for (int i = 2; i <= d_; ++i) {
            fact *= i;
        }
        return total_ / fact;
    }

  private:
    Vector centroid(const Face& f) const {
        Vector c = Vector::Zero(d_);
        for (int v : f) {
            c += pts_[v];
        }
        return c / static_cast<double>(f.size());
    }

    void descend(const Face& face, int k) {
        if (k == 0) {
            SmallMatrix m;
            m.rows = d_;
            m.cols = d_;
            const Vector& apex = chain_.front();
            for (int i = 1; i < d_; ++i) {
                for (int c = 0; c < d_; ++c) {
                    m.at(i - 1, c) = chain_[i][c] - apex[c];
                }
            }
            for (int c = 0; c < d_; ++c) {
                m.at(d_ - 1, c) = pts_[face.front()][c] - apex[c];
            }
            double det = 0.0;
            (void)eliminate(m, det);
            total_ += det;
            return;
        }
        chain_.push_back(centroid(face));
        std::set<Face> seen;
        for (const auto& act : active_) {
            Face sub;
            std::set_intersection(face.begin(), face.end(), act.begin(), act.end(), std::back_inserter(sub));
            if (sub.empty() || sub.size() == face.size() || seen.count(sub) != 0) {
                continue;
            }
            if (affine_rank(sub) != k - 1) {
                continue;
            }
            seen.insert(sub);
            descend(sub, k - 1);
        }
        chain_.pop_back();
    }

    const std::vector<Vector>& pts_;
    int d_;
    std::vector<Face> active_;
    std::vector<Vector> chain_;
    double total_ = 0.0;
};

}  // namespace

double volume(const Polyhedron& p) {
    const int d = p.dim();
    if (d < 1 || d > 6) {
        throw ArgumentError("volume: dimension " + std::to_string(d) + " outside [1, 6]");
    }
    if (!is_feasible(p)) {
        return 0.0;
    }
    return detail::volume_from_vertices(detail::enumerate_vertices(p));
}

double detail::volume_from_vertices(const VertexSet& vs) {
    const int d = static_cast<int>(vs.system.a.cols());
    if (static_cast<int>(vs.points.size()) < d + 1) {
        return 0.0;
    }
    if (d == 1) {
        double lo = vs.points[0][0], hi = lo;
        for (const auto& v : vs.points) {
            lo = std::min(lo, v[0]);
            hi = std::max(hi, v[0]);
        }
        return hi - lo;
    }
    FanVolume fan(vs);
    return fan.run();
}

}  // namespace densreach
