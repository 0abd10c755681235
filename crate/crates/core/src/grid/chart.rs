use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::stencil::Stencil;
use super::GridError;

/// Largest chart dimension supported by the pointwise kernels.
pub const MAX_DIM: usize = 6;

/// Smallest admissible node count along any axis.
pub const MIN_NODES: usize = 8;

/// One coordinate axis of a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub nodes: usize,
    /// Period for periodic axes, edge length for open axes.
    pub length: f64,
    pub origin: f64,
    pub periodic: bool,
}

impl Axis {
    pub fn periodic(nodes: usize, period: f64) -> Self {
        Axis {
            nodes,
            length: period,
            origin: 0.0,
            periodic: true,
        }
    }

    pub fn open(nodes: usize, origin: f64, length: f64) -> Self {
        Axis {
            nodes,
            length,
            origin,
            periodic: false,
        }
    }

    /// Node spacing. Periodic axes do not repeat the endpoint.
    pub fn spacing(&self) -> f64 {
        if self.periodic {
            self.length / self.nodes as f64
        } else {
            self.length / (self.nodes - 1) as f64
        }
    }

    pub fn coord(&self, j: usize) -> f64 {
        self.origin + j as f64 * self.spacing()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChartKind {
    PeriodicTorus,
    OpenBox,
    /// Product charts built internally (e.g. a periodic base times an open time axis).
    Mixed,
}

/// A structured coordinate grid. Nodes are stored row-major with axis 0 slowest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Chart {
    axes: Vec<Axis>,
    order: usize,
    #[serde(skip)]
    strides: Vec<usize>,
}

impl Chart {
    pub fn new(axes: Vec<Axis>, order: usize) -> Result<Self, GridError> {
        if axes.is_empty() || axes.len() > MAX_DIM {
            return Err(GridError::InvalidChart(format!(
                "dimension {} outside 1..={MAX_DIM}",
                axes.len()
            )));
        }
        Stencil::new(order)?;
        for (i, ax) in axes.iter().enumerate() {
            if ax.nodes < MIN_NODES {
                return Err(GridError::InvalidChart(format!(
                    "axis {i} has {} nodes, need at least {MIN_NODES}",
                    ax.nodes
                )));
            }
            if !(ax.length > 0.0 && ax.length.is_finite()) || !ax.origin.is_finite() {
                return Err(GridError::InvalidChart(format!(
                    "axis {i} has non-positive length"
                )));
            }
        }
        let mut strides = vec![1; axes.len()];
        for i in (0..axes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * axes[i + 1].nodes;
        }
        Ok(Chart {
            axes,
            order,
            strides,
        })
    }

    /// Periodic torus with the given node counts and periods.
    pub fn torus(sizes: &[usize], periods: &[f64]) -> Result<Self, GridError> {
        if sizes.len() != periods.len() {
            return Err(GridError::InvalidChart(
                "sizes/periods length mismatch".into(),
            ));
        }
        let axes = sizes
            .iter()
            .zip(periods)
            .map(|(&n, &l)| Axis::periodic(n, l))
            .collect();
        Chart::new(axes, 4)
    }

    /// Open box `[origin, origin + extent]` per axis, endpoints included.
    pub fn open_box(origin: &[f64], sizes: &[usize], extents: &[f64]) -> Result<Self, GridError> {
        if sizes.len() != extents.len() || sizes.len() != origin.len() {
            return Err(GridError::InvalidChart(
                "origin/sizes/extents length mismatch".into(),
            ));
        }
        let axes = sizes
            .iter()
            .zip(extents)
            .zip(origin)
            .map(|((&n, &l), &o)| Axis::open(n, o, l))
            .collect();
        Chart::new(axes, 4)
    }

    /// Same chart with a different central-difference order.
    pub fn with_order(mut self, order: usize) -> Result<Self, GridError> {
        Stencil::new(order)?;
        self.order = order;
        Ok(self)
    }

    pub fn into_shared(self) -> Arc<Chart> {
        Arc::new(self)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn stencil(&self) -> Stencil {
        Stencil::new(self.order).expect("order validated at construction")
    }

    pub fn half_width(&self) -> usize {
        self.order / 2
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.nodes).collect()
    }

    pub fn kind(&self) -> ChartKind {
        if self.axes.iter().all(|a| a.periodic) {
            ChartKind::PeriodicTorus
        } else if self.axes.iter().all(|a| !a.periodic) {
            ChartKind::OpenBox
        } else {
            ChartKind::Mixed
        }
    }

    /// True when every axis is periodic, i.e. the chart is a closed manifold.
    pub fn is_closed(&self) -> bool {
        self.kind() == ChartKind::PeriodicTorus
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Index of `node` along `axis`.
    #[inline]
    pub fn index_along(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.axes[axis].nodes
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        (0..self.dim()).map(|a| self.index_along(node, a)).collect()
    }

    pub fn node_of(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Coordinates of a node.
    pub fn coords(&self, node: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|a| self.axes[a].coord(self.index_along(node, a)))
            .collect()
    }

    /// Cell volume used by the Riemann-sum quadrature.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    /// A node is valid at `margin` when it lies at least `margin` nodes from
    /// every face of every open axis.
    #[inline]
    pub fn is_valid(&self, node: usize, margin: usize) -> bool {
        if margin == 0 {
            return true;
        }
        self.axes.iter().enumerate().all(|(a, ax)| {
            if ax.periodic {
                return true;
            }
            let j = self.index_along(node, a);
            j >= margin && j + margin < ax.nodes
        })
    }

    pub fn valid_nodes(&self, margin: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| self.is_valid(k, margin))
            .collect()
    }

    /// Checks that at least one node survives at `margin`.
    pub fn check_margin(&self, margin: usize) -> Result<(), GridError> {
        for (a, ax) in self.axes.iter().enumerate() {
            if !ax.periodic && 2 * margin >= ax.nodes {
                return Err(GridError::MarginExhausted {
                    axis: a,
                    margin,
                    nodes: ax.nodes,
                });
            }
        }
        Ok(())
    }

    /// Chart obtained by appending axes (fibers) after the existing ones.
    pub fn extend(&self, extra: &[Axis]) -> Result<Chart, GridError> {
        let mut axes = self.axes.clone();
        axes.extend_from_slice(extra);
        Chart::new(axes, self.order)
    }

    /// Chart obtained by prepending axes (e.g. a time axis) before the existing ones.
    pub fn prepend(&self, extra: &[Axis]) -> Result<Chart, GridError> {
        let mut axes = extra.to_vec();
        axes.extend_from_slice(&self.axes);
        Chart::new(axes, self.order)
    }

    /// Same axes with every node count multiplied by `num/den` (rounded).
    pub fn refined(&self, num: usize, den: usize) -> Result<Chart, GridError> {
        let axes = self
            .axes
            .iter()
            .map(|a| Axis {
                nodes: (a.nodes * num + den / 2) / den,
                ..a.clone()
            })
            .collect();
        Chart::new(axes, self.order)
    }

    /// Coordinate names used in CSV headers and expressions.
    pub fn coord_names(&self) -> Vec<String> {
        (0..self.dim()).map(|a| format!("x{a}")).collect()
    }
}
