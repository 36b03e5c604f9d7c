//! `ntk`: the two-rule benchmark's gradient kernel, rule-block means, and
//! separation gap, with CSV and SVG heatmap exports.

use latentlab_core::io::{write_csv, write_heatmap_svg, write_matrix_csv};
use latentlab_core::ntk::{
    pairwise_cosine, rule_block_means, two_rule_examples, GradScope, RuleTaskModel, BENCHMARK_DIM,
};
use latentlab_core::Rng;

use crate::config::{ensure_out_dir, Resolver};
use crate::{CliError, CommonArgs};

#[derive(clap::Args)]
pub struct NtkArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Weight of the rule-classifier term in the per-example loss.
    #[arg(long)]
    pub cls_weight: Option<f64>,
    /// Training steps before the kernel is measured (0 = at
    /// initialization, the tangent-kernel reading).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Examples per rule.
    #[arg(long)]
    pub per_rule: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Encoder parameters covered by the kernel: `all` or `output`.
    #[arg(long)]
    pub layer_filter: Option<String>,
}

pub fn ntk(args: NtkArgs) -> Result<(), CliError> {
    let mut resolver = Resolver::new(args.common.config.as_deref())?;
    let out = resolver.path(args.common.out, "out")?;
    let seed = resolver.u64(args.common.seed, "seed", 0);
    let cls_weight = resolver.f64(args.cls_weight, "cls-weight", 1.0);
    let steps = resolver.usize(args.steps, "steps", 0);
    let per_rule = resolver.usize(args.per_rule, "per-rule", 20);
    let hidden = resolver.usize(args.hidden, "hidden", 16);
    let embed_dim = resolver.usize(args.embed_dim, "embed-dim", 8);
    let layer_filter = resolver.string(args.layer_filter, "layer-filter", "all");
    let scope: GradScope = layer_filter.parse()?;
    ensure_out_dir(&out)?;

    let mut rng = Rng::from_seed(seed).split_str("two-rule-benchmark");
    let examples = two_rule_examples(per_rule, &mut rng);
    let mut model = RuleTaskModel::new(
        BENCHMARK_DIM,
        BENCHMARK_DIM,
        hidden,
        embed_dim,
        2,
        cls_weight,
        &mut rng,
    );
    if steps > 0 {
        let losses = model.train(&examples, steps, 1e-2, seed)?;
        let rows: Vec<Vec<String>> = losses
            .iter()
            .enumerate()
            .map(|(i, l)| vec![format!("{i}"), format!("{l}")])
            .collect();
        write_csv(&out.join("losses.csv"), &["step", "loss"], &rows)?;
    }

    let grads = model.gradient_matrix_scoped(&examples, scope)?;
    let cosines = pairwise_cosine(&grads)?;
    let (blocks, gap) = rule_block_means(&cosines, &grads.labels)?;

    let example_labels: Vec<String> =
        grads.labels.iter().map(|r| format!("rule{r}")).collect();
    write_matrix_csv(&out.join("gram.csv"), &cosines, &example_labels, Some(gap))?;
    let rule_labels: Vec<String> = vec!["rule0".into(), "rule1".into()];
    write_matrix_csv(&out.join("blocks.csv"), &blocks, &rule_labels, Some(gap))?;
    write_heatmap_svg(&out.join("heatmap.svg"), &cosines, &example_labels)?;
    write_csv(
        &out.join("summary.csv"),
        &["name", "value", "n"],
        &[vec!["gap".into(), format!("{gap}"), format!("{}", examples.len())]],
    )?;
    resolver.write_resolved(&out)?;
    Ok(())
}
