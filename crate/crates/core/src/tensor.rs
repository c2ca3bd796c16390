//! Dense row-major tensors with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is a cheap handle (reference-counted) onto shape + data +
//! optional gradient. Ops on tensors record a backward closure when any
//! input requires a gradient and grad mode is enabled; [`Tensor::backward`]
//! replays the recorded graph in reverse topological order and accumulates
//! gradients additively into every requiring leaf.

use std::cell::{Cell, Ref, RefCell};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

use num_traits::{Float, FromPrimitive};

use crate::error::{Result, TensorError};
use crate::rng::Rng;

/// Scalar element type of a tensor: f32 for deployment-scale compute,
/// f64 for gradient-check test mode.
pub trait Element:
    Float + FromPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    const DTYPE: &'static str;
    fn of_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    /// Error function at native precision.
    fn erf(self) -> Self;
}

impl Element for f32 {
    const DTYPE: &'static str = "f32";
    fn of_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn erf(self) -> Self {
        libm::erff(self)
    }
}

impl Element for f64 {
    const DTYPE: &'static str = "f64";
    fn of_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn erf(self) -> Self {
        libm::erf(self)
    }
}

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

pub(crate) fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

/// RAII guard disabling graph recording on this thread (inference mode).
pub struct NoGradGuard {
    prev: bool,
}

/// Disable graph recording until the returned guard is dropped.
pub fn no_grad() -> NoGradGuard {
    let prev = GRAD_ENABLED.with(|g| g.replace(false));
    NoGradGuard { prev }
}

impl Drop for NoGradGuard {
    fn drop(&mut self) {
        let prev = self.prev;
        GRAD_ENABLED.with(|g| g.set(prev));
    }
}

/// Everything a backward closure may need: upstream gradient, the op's own
/// output, and its input tensors.
pub(crate) struct BackCtx<'a, E: Element> {
    pub dy: &'a [E],
    pub out: &'a [E],
    pub inputs: &'a [Tensor<E>],
}

pub(crate) type BackFn<E> = Box<dyn Fn(&BackCtx<'_, E>) -> Vec<Option<Vec<E>>>>;

/// Recorded provenance of an op output; dropped once backward has consumed it.
pub(crate) struct Parent<E: Element> {
    pub op: &'static str,
    pub inputs: Vec<Tensor<E>>,
    pub back: BackFn<E>,
}

pub(crate) struct Inner<E: Element> {
    pub shape: Vec<usize>,
    pub data: Vec<E>,
    pub requires_grad: bool,
    pub grad: Option<Vec<E>>,
    pub parent: Option<Parent<E>>,
    pub backward_done: bool,
}

/// Shared handle to an n-dimensional real array participating in
/// reverse-mode differentiation. Cloning shares storage.
pub struct Tensor<E: Element>(pub(crate) Rc<RefCell<Inner<E>>>);

impl<E: Element> Clone for Tensor<E> {
    fn clone(&self) -> Self {
        Tensor(Rc::clone(&self.0))
    }
}

impl<E: Element> fmt::Debug for Tensor<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.0.borrow();
        write!(
            f,
            "Tensor<{}>{:?} requires_grad={}",
            E::DTYPE,
            inner.shape,
            inner.requires_grad
        )
    }
}

fn check_finite<E: Element>(op: &'static str, data: &[E]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(TensorError::NonFinite { op })
    }
}

impl<E: Element> Tensor<E> {
    fn new_leaf(shape: Vec<usize>, data: Vec<E>) -> Self {
        Tensor(Rc::new(RefCell::new(Inner {
            shape,
            data,
            requires_grad: false,
            grad: None,
            parent: None,
            backward_done: false,
        })))
    }

    /// Build a tensor from row-major data. Fails if the element count does
    /// not match the shape or any value is non-finite.
    pub fn from_vec(shape: &[usize], data: Vec<E>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(TensorError::Dim {
                op: "from_vec",
                msg: format!("shape {:?} implies {} elements, got {}", shape, numel, data.len()),
            });
        }
        check_finite("from_vec", &data)?;
        Ok(Self::new_leaf(shape.to_vec(), data))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Self::new_leaf(shape.to_vec(), vec![E::zero(); numel])
    }

    pub fn full(shape: &[usize], value: E) -> Result<Self> {
        let numel = shape.iter().product();
        let data = vec![value; numel];
        check_finite("full", &data)?;
        Ok(Self::new_leaf(shape.to_vec(), data))
    }

    pub fn scalar(value: E) -> Result<Self> {
        Self::from_vec(&[1], vec![value])
    }

    /// Uniform values in [lo, hi) drawn from `rng`.
    pub fn rand_uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut Rng) -> Self {
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| E::of_f64(rng.range(lo, hi))).collect();
        Self::new_leaf(shape.to_vec(), data)
    }

    /// Standard normal values scaled by `std`.
    pub fn rand_normal(shape: &[usize], std: f64, rng: &mut Rng) -> Self {
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| E::of_f64(rng.gauss() * std)).collect();
        Self::new_leaf(shape.to_vec(), data)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.0.borrow().shape.clone()
    }

    pub fn rank(&self) -> usize {
        self.0.borrow().shape.len()
    }

    pub fn numel(&self) -> usize {
        self.0.borrow().shape.iter().product()
    }

    /// Borrow the row-major data. Do not hold across ops on the same tensor.
    pub fn data(&self) -> Ref<'_, [E]> {
        Ref::map(self.0.borrow(), |i| i.data.as_slice())
    }

    pub fn to_vec(&self) -> Vec<E> {
        self.0.borrow().data.clone()
    }

    /// The single element of a one-element tensor.
    pub fn item(&self) -> E {
        let inner = self.0.borrow();
        assert_eq!(inner.data.len(), 1, "item() on tensor with shape {:?}", inner.shape);
        inner.data[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.0.borrow().requires_grad
    }

    /// Mark this tensor as a differentiation leaf (builder style).
    pub fn require_grad(self) -> Self {
        self.0.borrow_mut().requires_grad = true;
        self
    }

    /// Copy of the accumulated gradient, if any.
    pub fn grad(&self) -> Option<Tensor<E>> {
        let inner = self.0.borrow();
        inner
            .grad
            .as_ref()
            .map(|g| Self::new_leaf(inner.shape.clone(), g.clone()))
    }

    pub fn zero_grad(&self) {
        self.0.borrow_mut().grad = None;
    }

    /// Apply `f` to the gradient slice if one is present.
    pub fn with_grad<R>(&self, f: impl FnOnce(Option<&[E]>) -> R) -> R {
        let inner = self.0.borrow();
        f(inner.grad.as_deref())
    }

    /// Mutate the raw data in place (optimizer updates, tests). The caller
    /// is responsible for keeping values finite.
    pub fn with_data_mut<R>(&self, f: impl FnOnce(&mut [E]) -> R) -> R {
        let mut inner = self.0.borrow_mut();
        f(&mut inner.data)
    }

    /// Replace the data wholesale; the length must match.
    pub fn set_data(&self, data: Vec<E>) -> Result<()> {
        check_finite("set_data", &data)?;
        let mut inner = self.0.borrow_mut();
        if data.len() != inner.data.len() {
            return Err(TensorError::Dim {
                op: "set_data",
                msg: format!("expected {} elements, got {}", inner.data.len(), data.len()),
            });
        }
        inner.data = data;
        Ok(())
    }

    /// Fresh constant leaf with the same contents, detached from any graph.
    pub fn detach(&self) -> Tensor<E> {
        let inner = self.0.borrow();
        Self::new_leaf(inner.shape.clone(), inner.data.clone())
    }

    /// Element-wise conversion to another precision (detached leaf).
    pub fn cast<T: Element>(&self) -> Tensor<T> {
        let inner = self.0.borrow();
        Tensor::<T>::new_leaf(
            inner.shape.clone(),
            inner.data.iter().map(|&v| T::of_f64(Element::to_f64(v))).collect(),
        )
    }

    fn ptr_key(&self) -> usize {
        Rc::as_ptr(&self.0) as usize
    }

    /// Record an op output. `back` receives the upstream gradient and must
    /// return one optional gradient per input, each matching that input's
    /// element count.
    pub(crate) fn from_op(
        op: &'static str,
        inputs: Vec<Tensor<E>>,
        shape: Vec<usize>,
        data: Vec<E>,
        back: impl Fn(&BackCtx<'_, E>) -> Vec<Option<Vec<E>>> + 'static,
    ) -> Result<Self> {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        check_finite(op, &data)?;
        let record = grad_enabled() && inputs.iter().any(Tensor::requires_grad);
        let parent = record.then(|| Parent { op, inputs, back: Box::new(back) });
        Ok(Tensor(Rc::new(RefCell::new(Inner {
            shape,
            data,
            requires_grad: record,
            grad: None,
            parent,
            backward_done: false,
        }))))
    }

    /// Reverse-mode differentiation from a scalar loss. Populates `grad` on
    /// every requiring leaf reachable from the loss, accumulating additively
    /// (shared parameters receive the sum of their path gradients, and
    /// repeated training steps must call `zero_grad` in between). Consumes
    /// the recorded graph: a second call without re-running the forward
    /// pass is an error.
    pub fn backward(&self) -> Result<()> {
        {
            let inner = self.0.borrow();
            if inner.data.len() != 1 {
                return Err(TensorError::Backward(format!(
                    "loss must be scalar, got shape {:?}",
                    inner.shape
                )));
            }
            if inner.parent.is_none() {
                return Err(if inner.backward_done {
                    TensorError::Backward(
                        "graph already consumed; re-run the forward pass before calling backward again"
                            .into(),
                    )
                } else {
                    TensorError::Backward("tensor is detached (no recorded graph)".into())
                });
            }
        }

        // Topological order over the recorded subgraph, iteratively (model
        // graphs are deep enough to overflow a recursive walk).
        let mut order: Vec<Tensor<E>> = Vec::new();
        let mut visited: HashSet<usize> = HashSet::new();
        let mut stack: Vec<(Tensor<E>, usize)> = vec![(self.clone(), 0)];
        visited.insert(self.ptr_key());
        while let Some((node, child_idx)) = stack.pop() {
            let next_child = {
                let inner = node.0.borrow();
                inner.parent.as_ref().and_then(|p| {
                    p.inputs[child_idx..]
                        .iter()
                        .enumerate()
                        .find(|(_, t)| t.requires_grad() && !visited.contains(&t.ptr_key()))
                        .map(|(off, t)| (child_idx + off, t.clone()))
                })
            };
            match next_child {
                Some((idx, child)) => {
                    visited.insert(child.ptr_key());
                    stack.push((node, idx + 1));
                    stack.push((child, 0));
                }
                None => order.push(node),
            }
        }

        let mut grads: HashMap<usize, Vec<E>> = HashMap::new();
        grads.insert(self.ptr_key(), vec![E::one()]);

        for node in order.iter().rev() {
            let Some(dy) = grads.remove(&node.ptr_key()) else {
                continue;
            };
            let parent = node.0.borrow_mut().parent.take();
            match parent {
                Some(p) => {
                    let input_grads = {
                        let inner = node.0.borrow();
                        let ctx = BackCtx { dy: &dy, out: &inner.data, inputs: &p.inputs };
                        (p.back)(&ctx)
                    };
                    debug_assert_eq!(input_grads.len(), p.inputs.len(), "op {}", p.op);
                    for (input, g) in p.inputs.iter().zip(input_grads) {
                        let Some(g) = g else { continue };
                        if !input.requires_grad() {
                            continue;
                        }
                        debug_assert_eq!(g.len(), input.numel(), "op {} grad size", p.op);
                        match grads.get_mut(&input.ptr_key()) {
                            Some(acc) => {
                                for (a, b) in acc.iter_mut().zip(&g) {
                                    *a = *a + *b;
                                }
                            }
                            None => {
                                grads.insert(input.ptr_key(), g);
                            }
                        }
                    }
                }
                None => {
                    // Leaf: fold the arriving gradient into storage.
                    let mut inner = node.0.borrow_mut();
                    match inner.grad.as_mut() {
                        Some(acc) => {
                            for (a, b) in acc.iter_mut().zip(&dy) {
                                *a = *a + *b;
                            }
                        }
                        None => inner.grad = Some(dy),
                    }
                }
            }
        }

        self.0.borrow_mut().backward_done = true;
        Ok(())
    }
}
