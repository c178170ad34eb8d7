package com.example.calc;

import static org.junit.jupiter.api.Assertions.assertNotNull;

import org.junit.jupiter.api.Test;

public class CalculatorPovTest {
    @Test
    public void computeReachesRuntime() {
        Object rt = new Calculator().compute("java.lang.Runtime.getRuntime()");
        assertNotNull(rt);
    }
}
