//! Writes the synthetic adult-style fixture CSV to stdout.
//!
//! Usage: cargo run -p progex-core --example adult_fixture > fixtures/adult.csv

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ROWS: usize = 2000;
const EDUCATION: [(&str, f64, f64); 5] = [
    ("HS-grad", 0.35, 0.0),
    ("Some-college", 0.25, 0.3),
    ("Bachelors", 0.25, 1.0),
    ("Masters", 0.10, 1.4),
    ("Doctorate", 0.05, 1.8),
];

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1994);
    println!("Age,Education,Married,Sex,HoursPerWeek,CapitalGain,income");
    for _ in 0..ROWS {
        let age: u32 = rng.gen_range(17..=80);
        let mut u = rng.gen::<f64>();
        let mut edu = EDUCATION[0];
        for e in EDUCATION {
            if u < e.1 {
                edu = e;
                break;
            }
            u -= e.1;
        }
        let married = rng.gen_bool(if age < 25 { 0.2 } else { 0.55 });
        let male = rng.gen_bool(0.67);
        let hours: u32 = if rng.gen_bool(0.5) { 40 } else { rng.gen_range(15..=70) };
        let gain: u32 = if rng.gen_bool(0.88) { 0 } else { rng.gen_range(10..=200) * 100 };
        let score = -4.2
            + 2.4 * f64::from(u8::from(married))
            + 2.2 * f64::from(u8::from(gain > 0))
            + 0.03 * (f64::from(age) - 38.0)
            + 0.04 * (f64::from(hours) - 40.0)
            + edu.2
            + 0.3 * f64::from(u8::from(male));
        let p = 1.0 / (1.0 + (-score).exp());
        let label = if rng.gen::<f64>() < p { ">50K" } else { "<=50K" };
        // a sprinkling of unknown cells, as in the census extract
        let edu_cell = if rng.gen_bool(0.01) { "?" } else { edu.0 };
        println!(
            "{age},{edu_cell},{},{},{hours},{gain},{label}",
            if married { "yes" } else { "no" },
            if male { "Male" } else { "Female" }
        );
    }
}
