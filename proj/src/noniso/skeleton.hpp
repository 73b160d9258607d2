#pragma once

#include "noniso/eigsym.hpp"
#include "noniso/mat.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace noniso {

// Kinematic graph: joints, undirected bones with reference lengths, and an
// optional hub joint used by the masked closure matrix. Must be connected
// and simple.
struct Skeleton {
    std::vector<std::string> joint_names;
    std::vector<std::pair<int, int>> edges;
    std::vector<double> bone_lengths; // one per edge, meters
    std::optional<int> hub_joint;

    int joints() const { return static_cast<int>(joint_names.size()); }
    int bones() const { return static_cast<int>(edges.size()); }

    // Throws ValidationError naming the offending edge/length.
    void validate() const;
};

enum class NormKind { spectral, frobenius };

// Normalized node-correlation matrix with its eigendecomposition. The input
// connectivity matrix is shifted so its smallest eigenvalue is zero, then
// scaled: spectral divides by the eigenvalue range, frobenius by the mean of
// the shifted eigenvalues. Eigenvalues are clamped at zero and sorted
// ascending; eigvecs columns match that order.
struct CorrelationModel {
    Mat sigma_n;
    Mat eigvecs;                 // U
    std::vector<double> eigvals; // Lambda_N, ascending, >= 0
    NormKind norm_kind = NormKind::spectral;

    int order() const { return sigma_n.rows; }
};

Mat build_adjacency(const Skeleton& s);

// All-pairs hop counts via BFS; requires a connected graph.
Mat hop_counts(const Skeleton& s);

// Kinematic tree rooted at joint 0 (BFS over the edges): parent[j], with
// -1 at the root. Requires the graph to be a tree.
std::vector<int> skeleton_parents(const Skeleton& s);

// Entry (i,j) = eta^(hops(i,j) - 1) for i != j, diagonal zero.
Mat closure_matrix(const Skeleton& s, double eta);

// Closure matrix with pairs whose shortest path passes strictly through the
// hub zeroed out; pairs touching the hub itself keep their value.
Mat masked_closure_matrix(const Skeleton& s, double eta, int hub);

CorrelationModel correlation_from_matrix(const Mat& m, NormKind kind);

// JSON file: {"joints": [...], "edges": [[i,j],...], "bone_lengths": [...],
// "hub": optional}. Parse errors report line numbers; semantic errors name
// the offending entry.
Skeleton load_skeleton_json(const std::string& path);
void save_skeleton_json(const Skeleton& s, const std::string& path);

} // namespace noniso
