#pragma once

#include "mpmlite/kernels.hpp"
#include "mpmlite/lattice_index.hpp"
#include "mpmlite/types.hpp"

#include <cstddef>
#include <vector>

namespace mpmlite {

/// Per-material quadrature data colocated at a cell center.
template <int dim>
struct CellSlot {
  int material = -1;  // -1 for the merged explicit slot
  double volume = 0.0;
  Mat<dim> tau = Mat<dim>::Zero();
  Mat<dim> base = Mat<dim>::Identity();      // stretch base used by the solve
  Mat<dim> base_ref = Mat<dim>::Identity();  // base reconstructed from tau
  double J_base = 1.0;                       // fluid slots
  bool active = true;                        // false after an inversion fallback
};

/// Affine velocity constraint v <- P v + target at one node; target lies in
/// the range of I - P.
template <int dim>
struct NodeConstraint {
  int node = -1;
  Mat<dim> P = Mat<dim>::Zero();
  Vec<dim> target = Vec<dim>::Zero();
};

/// Transient cell and node storage. Everything here is rebuilt by unload;
/// particles live elsewhere.
template <int dim>
struct GridState {
  GridDesc<dim> grid;
  LatticeStorage storage = LatticeStorage::Sparse;

  LatticeIndex<dim> cell_index;
  LatticeIndex<dim> node_index;

  // active cells, ordered by row-major linear index
  std::vector<IVec<dim>> cell_coord;
  std::vector<double> cell_mass;
  std::vector<Vec<dim>> cell_v;
  std::vector<Mat<dim>> cell_G;
  std::vector<int> slot_begin;  // size cells + 1
  std::vector<CellSlot<dim>> slots;
  std::vector<CornerArray<dim>> cell_nodes;  // node of corner `bits`

  // active nodes, ordered by row-major linear index
  std::vector<IVec<dim>> node_coord;
  std::vector<double> node_mass;
  std::vector<Vec<dim>> node_v;
  std::vector<Vec<dim>> node_v_old;
  std::vector<Vec<dim>> node_force;
  std::vector<CornerArray<dim>> node_cells;  // cell having this node as corner `bits`, or -1
  std::vector<int> node_constraint;          // index into constraints, or -1
  std::vector<NodeConstraint<dim>> constraints;

  // particle binding: cell of each Q1 corner (or -1) and its weight
  std::vector<CornerArray<dim>> particle_cells;
  std::vector<std::array<double, corner_count(dim)>> particle_weights;

  GridState() = default;
  GridState(const GridDesc<dim>& g, LatticeStorage s) { reset(g, s); }

  void reset(const GridDesc<dim>& g, LatticeStorage s) {
    grid = g;
    storage = s;
    cell_index.reset(g.dims, s);
    node_index.reset(g.node_dims(), s);
    clear();
  }

  std::size_t cell_count() const { return cell_coord.size(); }
  std::size_t node_count() const { return node_coord.size(); }

  /// Zero every cell and node accumulator and deactivate all cells.
  void clear() {
    cell_index.clear();
    node_index.clear();
    cell_coord.clear();
    cell_mass.clear();
    cell_v.clear();
    cell_G.clear();
    slot_begin.assign(1, 0);
    slots.clear();
    cell_nodes.clear();
    node_coord.clear();
    node_mass.clear();
    node_v.clear();
    node_v_old.clear();
    node_force.clear();
    node_cells.clear();
    node_constraint.clear();
    constraints.clear();
    particle_cells.clear();
    particle_weights.clear();
  }

  /// x_i - x_c for the node at corner `bits` of any cell.
  Vec<dim> corner_offset_position(int bits) const {
    Vec<dim> r;
    for (int a = 0; a < dim; ++a) r[a] = (corner_bit(bits, a) - 0.5) * grid.dx;
    return r;
  }
};

/// Clear all cell and node data; particles are untouched.
template <int dim>
void clear_transient(GridState<dim>& state) {
  state.clear();
}

}  // namespace mpmlite
