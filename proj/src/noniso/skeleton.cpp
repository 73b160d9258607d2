#include "noniso/skeleton.hpp"

#include <json.hpp>

#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

namespace noniso {

namespace {

std::string edge_str(int i, int j) {
    std::ostringstream os;
    os << "(" << i << "," << j << ")";
    return os.str();
}

} // namespace

void Skeleton::validate() const {
    const int j = joints();
    require(j >= 2, "skeleton: needs at least 2 joints, got " + std::to_string(j));
    require(bone_lengths.size() == edges.size(),
            "skeleton: bone_lengths count " + std::to_string(bone_lengths.size()) +
                " does not match edge count " + std::to_string(edges.size()));

    std::set<std::pair<int, int>> seen;
    for (size_t e = 0; e < edges.size(); ++e) {
        auto [a, b] = edges[e];
        require(a >= 0 && a < j && b >= 0 && b < j,
                "skeleton: edge " + edge_str(a, b) + " has out-of-range joint index");
        require(a != b, "skeleton: self-loop at edge " + edge_str(a, b));
        auto key = std::minmax(a, b);
        require(seen.insert(key).second, "skeleton: duplicate edge " + edge_str(a, b));
        require(bone_lengths[e] > 0.0,
                "skeleton: bone length for edge " + edge_str(a, b) + " must be positive");
    }
    if (hub_joint) {
        require(*hub_joint >= 0 && *hub_joint < j,
                "skeleton: hub joint " + std::to_string(*hub_joint) + " out of range");
    }

    // Connectivity by BFS from joint 0.
    std::vector<char> visited(j, 0);
    std::deque<int> queue{0};
    visited[0] = 1;
    int count = 1;
    while (!queue.empty()) {
        int cur = queue.front();
        queue.pop_front();
        for (auto [a, b] : edges) {
            int other = -1;
            if (a == cur) other = b;
            else if (b == cur) other = a;
            if (other >= 0 && !visited[other]) {
                visited[other] = 1;
                ++count;
                queue.push_back(other);
            }
        }
    }
    require(count == j, "skeleton: graph is disconnected (" + std::to_string(count) + " of " +
                            std::to_string(j) + " joints reachable from joint 0)");
}

Mat build_adjacency(const Skeleton& s) {
    s.validate();
    Mat a(s.joints(), s.joints());
    for (auto [i, j] : s.edges) {
        a(i, j) = 1.0;
        a(j, i) = 1.0;
    }
    return a;
}

Mat hop_counts(const Skeleton& s) {
    s.validate();
    const int j = s.joints();
    std::vector<std::vector<int>> adj(j);
    for (auto [a, b] : s.edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    Mat hops(j, j);
    for (int src = 0; src < j; ++src) {
        std::vector<int> dist(j, -1);
        std::deque<int> queue{src};
        dist[src] = 0;
        while (!queue.empty()) {
            int cur = queue.front();
            queue.pop_front();
            for (int nxt : adj[cur]) {
                if (dist[nxt] < 0) {
                    dist[nxt] = dist[cur] + 1;
                    queue.push_back(nxt);
                }
            }
        }
        for (int dst = 0; dst < j; ++dst) hops(src, dst) = dist[dst];
    }
    return hops;
}

std::vector<int> skeleton_parents(const Skeleton& s) {
    s.validate();
    require(s.bones() == s.joints() - 1,
            "skeleton_parents: graph has cycles, not a kinematic tree");
    std::vector<std::vector<int>> adj(s.joints());
    for (auto [a, b] : s.edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<int> parent(s.joints(), -2);
    std::deque<int> queue{0};
    parent[0] = -1;
    while (!queue.empty()) {
        const int cur = queue.front();
        queue.pop_front();
        for (int nxt : adj[cur]) {
            if (parent[nxt] == -2) {
                parent[nxt] = cur;
                queue.push_back(nxt);
            }
        }
    }
    return parent;
}

Mat closure_matrix(const Skeleton& s, double eta) {
    require(eta > 0.0 && eta < 1.0, "closure_matrix: eta must be in (0,1), got " + std::to_string(eta));
    const Mat hops = hop_counts(s);
    const int j = s.joints();
    Mat r(j, j);
    for (int a = 0; a < j; ++a) {
        for (int b = 0; b < j; ++b) {
            if (a == b) continue;
            const double v = std::pow(eta, hops(a, b) - 1.0);
            r(a, b) = v;
        }
    }
    // Enforce bit-exact symmetry against pow() rounding asymmetries.
    for (int a = 0; a < j; ++a)
        for (int b = a + 1; b < j; ++b) r(b, a) = r(a, b);
    return r;
}

Mat masked_closure_matrix(const Skeleton& s, double eta, int hub) {
    require(hub >= 0 && hub < s.joints(),
            "masked_closure_matrix: hub " + std::to_string(hub) + " out of range");
    Mat r = closure_matrix(s, eta);
    const Mat hops = hop_counts(s);
    const int j = s.joints();
    // The hub lies strictly inside a shortest path i..j exactly when
    // hops(i,hub) + hops(hub,j) == hops(i,j) with both legs nonzero.
    for (int a = 0; a < j; ++a) {
        for (int b = 0; b < j; ++b) {
            if (a == b || a == hub || b == hub) continue;
            if (hops(a, hub) + hops(hub, b) == hops(a, b)) r(a, b) = 0.0;
        }
    }
    return r;
}

CorrelationModel correlation_from_matrix(const Mat& m, NormKind kind) {
    require(m.rows == m.cols && m.rows >= 2, "correlation_from_matrix: matrix must be square, order >= 2");
    for (int i = 0; i < m.rows; ++i)
        for (int j = i + 1; j < m.cols; ++j)
            require(m(i, j) == m(j, i), "correlation_from_matrix: input not symmetric at " + edge_str(i, j));

    const EigSym eig = eig_symmetric(m);
    const double lam_min = eig.values.front();
    const double lam_max = eig.values.back();

    double normalizer = 0.0;
    if (kind == NormKind::spectral) {
        normalizer = lam_max - lam_min;
    } else {
        double mean = 0.0;
        for (double v : eig.values) mean += (v - lam_min);
        normalizer = mean / static_cast<double>(eig.values.size());
    }
    require(normalizer > 1e-12 * std::max(1.0, std::fabs(lam_max)),
            "correlation_from_matrix: degenerate input (all eigenvalues equal; matrix is a multiple of I)");

    CorrelationModel out;
    out.norm_kind = kind;
    out.eigvecs = eig.vectors;
    out.eigvals.reserve(eig.values.size());
    for (double v : eig.values) {
        double shifted = (v - lam_min) / normalizer;
        out.eigvals.push_back(shifted < 0.0 ? 0.0 : shifted);
    }

    // Rebuild Sigma_N from the clamped eigenvalues so matrix and
    // decomposition agree exactly; symmetrize to kill rounding skew.
    out.sigma_n = sandwich_diag(eig.vectors, out.eigvals);
    for (int i = 0; i < out.sigma_n.rows; ++i) {
        for (int j = i + 1; j < out.sigma_n.cols; ++j) {
            const double v = 0.5 * (out.sigma_n(i, j) + out.sigma_n(j, i));
            out.sigma_n(i, j) = v;
            out.sigma_n(j, i) = v;
        }
    }
    return out;
}

namespace {

int line_of_byte(const std::string& text, size_t byte) {
    int line = 1;
    for (size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

} // namespace

Skeleton load_skeleton_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "skeleton: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path + ":" + std::to_string(line_of_byte(text, e.byte)) +
                              ": JSON parse error: " + e.what());
    }

    Skeleton s;
    try {
        require(doc.contains("joints"), path + ": missing \"joints\" array");
        require(doc.contains("edges"), path + ": missing \"edges\" array");
        require(doc.contains("bone_lengths"), path + ": missing \"bone_lengths\" array");
        s.joint_names = doc.at("joints").get<std::vector<std::string>>();
        for (const auto& e : doc.at("edges")) {
            require(e.is_array() && e.size() == 2, path + ": each edge must be a pair [i,j]");
            s.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
        }
        s.bone_lengths = doc.at("bone_lengths").get<std::vector<double>>();
        if (doc.contains("hub") && !doc.at("hub").is_null()) s.hub_joint = doc.at("hub").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": malformed skeleton JSON: " + e.what());
    }
    s.validate();
    return s;
}

void save_skeleton_json(const Skeleton& s, const std::string& path) {
    nlohmann::json doc;
    doc["joints"] = s.joint_names;
    auto edges = nlohmann::json::array();
    for (auto [a, b] : s.edges) edges.push_back({a, b});
    doc["edges"] = edges;
    doc["bone_lengths"] = s.bone_lengths;
    if (s.hub_joint) doc["hub"] = *s.hub_joint;
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "skeleton: cannot write " + path);
    out << doc.dump(2) << "\n";
}

} // namespace noniso
