/// Six significant digits; scientific notation outside `[1e-4, 1e6)`.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    let e = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&e) {
        return format!("{x:.5e}");
    }
    let s = format!("{:.*}", (5 - e) as usize, x);
    // rounding may carry into a new leading digit
    let digits = s.chars().filter(|c| c.is_ascii_digit()).skip_while(|&c| c == '0').count();
    if digits > 6 && s.contains('.') {
        return format!("{:.*}", (4 - e).max(0) as usize, x);
    }
    s
}
