package com.example.calc;

import com.acme.scriptbox.ScriptEngine;

public class Calculator {
    private final ScriptEngine engine = new ScriptEngine();

    public Object compute(String expr) {
        return evaluate(expr);
    }

    private Object evaluate(String expr) {
        return engine.eval(expr);
    }
}
