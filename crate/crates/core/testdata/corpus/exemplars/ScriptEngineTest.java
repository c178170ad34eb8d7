@Test
public void sandboxBlocksRuntimeAccess() {
    ScriptEngine engine = new ScriptEngine();
    assertThrows(SecurityException.class, () -> engine.eval("java.lang.Runtime.getRuntime()"));
}
