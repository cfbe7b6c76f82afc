//! Where does a stack of diagonal-DCT layers start to beat the dense
//! mult-add count? Dense costs N^2; the stack costs
//! L (2 kappa N log2 N + 2 N), so deep stacks only pay off for wide layers.

use sellkit::analysis::acdc_crossover;
use sellkit::transforms::acdc_multadds;
use sellkit::CostModel;

fn main() -> sellkit::Result<()> {
    let model = CostModel::default();
    println!("DCT cost model: kappa = {}", model.dct_kappa);

    println!("crossover width by layer count:");
    for layers in [1usize, 2, 4, 8, 12, 16] {
        let n = acdc_crossover(layers, &model)?;
        println!("  L = {layers:>2}: dense beaten from {n} units");
    }

    let layers = 12u64;
    println!("12-layer stack around its crossover:");
    for n in [256u64, 512, 625, 626, 1024, 2048] {
        let stack = acdc_multadds(n, layers, &model);
        let dense = n * n;
        println!(
            "  N = {n:>4}: stack {stack:>9} vs dense {dense:>9}  ({})",
            if stack < dense { "stack wins" } else { "dense wins" }
        );
    }
    Ok(())
}
