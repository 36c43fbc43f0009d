use std::sync::Arc;

use super::features::{encode_into, feature_dim};
use super::network::PolicyNetwork;
use crate::error::{Error, Result};
use crate::pomdp::Policy;
use crate::repair::{FactoredBelief, RepairAction, RepairModel};

/// Anything that maps a feature vector to class probabilities.
pub trait ClassScorer: Sync + Send {
    fn class_probs(&self, features: &[f64]) -> Result<Vec<f64>>;
}

impl ClassScorer for PolicyNetwork {
    fn class_probs(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.predict(features)
    }
}

impl<F> ClassScorer for F
where
    F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
{
    fn class_probs(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self(features))
    }
}

/// Sequential inference: slot `ℓ` sees the components inferred for agents
/// before it and `base` components for agents after it, and takes the most
/// probable class among its feasible components (lowest class on ties).
pub fn infer_control<S: ClassScorer + ?Sized>(
    scorer: &S,
    model: &RepairModel,
    b: &FactoredBelief,
    base: &[RepairAction],
) -> Result<Vec<RepairAction>> {
    let mut view = base.to_vec();
    let mut features = Vec::new();
    for l in 0..view.len() {
        encode_into(b, l, &view, &mut features);
        let probs = scorer.class_probs(&features)?;
        let mut best: Option<(f64, RepairAction)> = None;
        for c in model.control_set(b, l) {
            let p = *probs
                .get(c.class_index())
                .ok_or_else(|| Error::Classifier(format!("no score for class {}", c.class_index())))?;
            if best.is_none_or(|(bp, _)| p > bp) {
                best = Some((p, c));
            }
        }
        view[l] = best.expect("Fix is always feasible").1;
    }
    Ok(view)
}

/// A trained network used as a policy. Successor slots are filled by the
/// policy it was trained to improve.
#[derive(Clone)]
pub struct ClassifierPolicy {
    net: Arc<PolicyNetwork>,
    base: Arc<dyn Policy<RepairModel>>,
}

impl std::fmt::Debug for ClassifierPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClassifierPolicy")
            .field("input_dim", &self.net.input_dim())
            .field("classes", &self.net.classes())
            .finish()
    }
}

impl ClassifierPolicy {
    pub fn new(net: Arc<PolicyNetwork>, base: Arc<dyn Policy<RepairModel>>, model: &RepairModel) -> Result<Self> {
        let n = model.graph().num_vertices();
        let expected = feature_dim(n, model.chain().levels(), model.agents());
        if net.input_dim() != expected || net.classes() != n + 1 {
            return Err(Error::Classifier(format!(
                "network shape {}→{} does not fit this instance ({expected}→{})",
                net.input_dim(),
                net.classes(),
                n + 1
            )));
        }
        Ok(Self { net, base })
    }

    pub fn network(&self) -> &Arc<PolicyNetwork> {
        &self.net
    }

    pub fn base(&self) -> &Arc<dyn Policy<RepairModel>> {
        &self.base
    }
}

impl Policy<RepairModel> for ClassifierPolicy {
    fn joint_control(&self, model: &RepairModel, b: &FactoredBelief) -> Result<Vec<RepairAction>> {
        let base = self.base.joint_control(model, b)?;
        infer_control(self.net.as_ref(), model, b, &base)
    }
}
