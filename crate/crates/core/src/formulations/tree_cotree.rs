//! Tree-cotree gauged T-Ω formulation. The primal grid carries the magnetic
//! quantities here: the magnetic voltage lives on primal edges, the currents on
//! primal facets and the scalar magnetic potential on primal points.

use std::collections::VecDeque;

use super::{blocks, DaeSystem, FieldMap, FitProblem, Formulation, Observable, Reduce, SourceTerm};
use crate::error::{Error, Result};
use crate::grid::{Grid, SubdomainMap};
use crate::linsolve::SparseMatrix;
use crate::materials::{assemble_hodge, curl_preimage, discretise_winding_facets, Property};

/// Spanning tree of the closed conducting region and its complement.
#[derive(Debug, Clone)]
pub struct TreeCotree {
    /// Points of the conducting cells, ascending.
    pub nodes: Vec<usize>,
    /// Edge slots of the conducting cells, ascending.
    pub edges: Vec<usize>,
    pub tree: Vec<usize>,
    pub cotree: Vec<usize>,
}

/// Breadth-first spanning tree over the edges of the conducting cells, rooted at the
/// lowest-index conductor point; neighbours are visited in ascending point order.
/// The search first runs over the edges on the conductor surface and then continues
/// inward, so the tree spans the surface and every interior field outside the
/// surface gradients stays representable by cotree values.
pub fn build_tree_cotree(grid: &Grid, sub: &SubdomainMap) -> Result<TreeCotree> {
    let cells = sub.conductor_cells(grid);
    if cells.is_empty() {
        return Err(Error::TreeError("no conducting cells".into()));
    }
    let n = grid.n_points();
    let k = grid.strides();
    let mut in_node = vec![false; n];
    let mut cells_at_edge = vec![0u8; grid.n_dof()];
    for &c in &cells {
        for dx in 0..2 {
            for dy in 0..2 {
                for dz in 0..2 {
                    in_node[c + dx * k[0] + dy * k[1] + dz * k[2]] = true;
                }
            }
        }
        for w in crate::grid::Axis::ALL {
            let (u, v) = w.others();
            for du in 0..2 {
                for dv in 0..2 {
                    cells_at_edge[grid.edge(w, c + du * k[u.index()] + dv * k[v.index()])] += 1;
                }
            }
        }
    }
    let nodes: Vec<usize> = (0..n).filter(|&p| in_node[p]).collect();
    let edges: Vec<usize> = (0..grid.n_dof()).filter(|&e| cells_at_edge[e] > 0).collect();
    let mut adj: Vec<Vec<(usize, usize, bool)>> = vec![Vec::new(); n];
    for &e in &edges {
        let (w, p) = grid.split_slot(e);
        let q = p + k[w.index()];
        let surface = cells_at_edge[e] < 4;
        adj[p].push((q, e, surface));
        adj[q].push((p, e, surface));
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
    }
    let mut visited = vec![false; n];
    let mut tree = Vec::with_capacity(nodes.len() - 1);
    let mut order = vec![nodes[0]];
    visited[nodes[0]] = true;
    for surface_only in [true, false] {
        let mut queue: VecDeque<usize> = order.iter().copied().collect();
        while let Some(p) = queue.pop_front() {
            for &(q, e, surface) in &adj[p] {
                if !visited[q] && (surface || !surface_only) {
                    visited[q] = true;
                    tree.push(e);
                    order.push(q);
                    queue.push_back(q);
                }
            }
        }
    }
    if tree.len() + 1 != nodes.len() {
        return Err(Error::TreeError(format!(
            "conducting region is disconnected: tree reaches {} of {} points",
            tree.len() + 1,
            nodes.len()
        )));
    }
    tree.sort_unstable();
    let cotree = edges.iter().copied().filter(|e| tree.binary_search(e).is_err()).collect();
    Ok(TreeCotree { nodes, edges, tree, cotree })
}

/// `[t; ψ]` system with `h = P_t t + S̃ᵀψ + h_s i(t)`:
/// `P_tᵀCᵀM_ρCP_t t + P_tᵀM_μP_t ṫ + P_tᵀM_μS̃ᵀψ̇ = −P_tᵀM_μh_s i'` and
/// `S̃M_μP_t t + S̃M_μS̃ᵀψ = −S̃M_μh_s i`. The potential is fixed to zero at point 0.
pub fn mqs_tomega(p: &FitProblem) -> Result<DaeSystem> {
    let grid = &p.grid;
    let tc = build_tree_cotree(grid, &p.sub)?;
    let edges: Vec<usize> = (0..grid.n_dof()).filter(|&e| !grid.phantom_edge[e]).collect();
    let facets: Vec<usize> = (0..grid.n_dof()).filter(|&f| !grid.phantom_facet[f]).collect();
    let cells: Vec<usize> = (0..grid.n_points()).filter(|&c| !grid.phantom_cell[c]).collect();
    let points: Vec<usize> = (1..grid.n_points()).collect();
    let mut edge_local = vec![usize::MAX; grid.n_dof()];
    for (i, &e) in edges.iter().enumerate() {
        edge_local[e] = i;
    }
    let c = p.topo.curl.select(&facets, &edges).to_f64();
    let div = p.topo.div.select(&cells, &facets).to_f64();
    let sd = p.topo.dual_div.select(&points, &edges).to_f64();
    let mu_all = assemble_hodge(grid, &p.sub, Property::Permeability)?;
    let mu: Vec<f64> = edges.iter().map(|&e| mu_all[e]).collect();
    let rho_all = assemble_hodge(grid, &p.sub, Property::Resistivity)?;
    let rho: Vec<f64> = facets.iter().map(|&f| rho_all[f]).collect();
    let ncot = tc.cotree.len();
    let pt = SparseMatrix::from_triplets(
        edges.len(),
        ncot,
        &tc.cotree.iter().enumerate().map(|(j, &e)| (edge_local[e], j, 1.0)).collect::<Vec<_>>(),
    );
    let cp = c.matmul(&pt);
    let k11 = cp.transpose().scale_cols(&rho).matmul(&cp);
    let mu_pt = pt.scale_rows(&mu);
    let m11 = pt.transpose().matmul(&mu_pt);
    let sd_mu = sd.scale_cols(&mu);
    let m12 = sd_mu.matmul(&pt).transpose();
    let k21 = sd_mu.matmul(&pt);
    let k22 = sd_mu.matmul(&sd.transpose());
    let np = points.len();
    let sizes = [ncot, np];
    let m = blocks(&[vec![Some(&m11), Some(&m12)], vec![None, None]], &sizes, &sizes);
    let k = blocks(&[vec![Some(&k11), None], vec![Some(&k21), Some(&k22)]], &sizes, &sizes);
    let mut sys = DaeSystem::new(Formulation::MqsTomega, m, k, &[("t", ncot), ("psi", np)], &[("faraday", ncot), ("flux", np)]);
    sys.expected_index = Some(1);

    let mut h_lift = Vec::new();
    for (w, &current) in p.windings.iter().zip(&p.currents) {
        let x_all = discretise_winding_facets(grid, w)?;
        let x: Vec<f64> = facets.iter().map(|&f| x_all[f]).collect();
        let hs = curl_preimage(&c, &div, &x)?;
        let mu_hs: Vec<f64> = hs.iter().zip(&mu).map(|(h, m)| h * m).collect();
        sys.add_source("faraday", pt.matvec_t(&mu_hs).iter().map(|v| -v).collect(), current, true);
        sys.add_source("flux", sd.matvec(&mu_hs).iter().map(|v| -v).collect(), current, false);
        h_lift.push(SourceTerm::new(hs, current));
    }
    let sd_t = sd.transpose();
    let h_map = blocks(&[vec![Some(&pt), Some(&sd_t)]], &[edges.len()], &sizes);
    let fh = sys.add_field(FieldMap { name: "h".into(), map: h_map, lift: h_lift, rate: false });
    sys.observables.push(Observable { name: "E_mag".into(), field: fh, reduce: Reduce::Energy(mu) });
    Ok(sys)
}
