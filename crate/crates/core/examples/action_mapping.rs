//! Keyboard and mouse input turned into twists, then quantized for other
//! action vocabularies.

use twistworld::action::{quantize_to_external, ActionMapper, InputState, QuantizeParams, QuantizeScheme, Sensitivity};

fn main() -> twistworld::Result<()> {
    let cfg = Sensitivity::default();
    let mut mapper = ActionMapper::new(cfg)?;
    let inputs = [
        InputState { keys: "W".parse()?, mouse_dx: 0.0, mouse_dy: 0.0, dt: 0.05 },
        InputState { keys: "W+D".parse()?, mouse_dx: 12.0, mouse_dy: 0.0, dt: 0.05 },
        InputState { keys: "".parse()?, mouse_dx: 0.0, mouse_dy: -30.0, dt: 0.05 },
        InputState::idle(0.05),
    ];
    let params = QuantizeParams::from_sensitivity(&cfg, 0.05);
    for input in &inputs {
        let twist = mapper.map(input)?;
        println!("{:>5} dx={:>5} dy={:>5} -> {:?}", input.keys.to_string(), input.mouse_dx, input.mouse_dy, twist.to_array());
        for scheme in [QuantizeScheme::BinaryKeys, QuantizeScheme::DiscreteSpeed, QuantizeScheme::Text] {
            println!("      {:?}", quantize_to_external(&twist, scheme, &params));
        }
    }
    println!("pitch after the sequence: {:.3} rad", mapper.pitch());
    Ok(())
}
